// Load a small knowledge base and ask what a user is likely to request next.

use semcache::kb::Predicate;
use semcache::{InferencePolicy, KnowledgeBase, RelationRule};

const KB: &str = r#"
"https://en.wikipedia.org/wiki/Ann_Lee" type Person
"https://en.wikipedia.org/wiki/Ann_Lee" size 60000
"https://en.wikipedia.org/wiki/Bo_Lee" type Person
"https://en.wikipedia.org/wiki/Bo_Lee" size 40000
"https://en.wikipedia.org/wiki/Ann_Lee" spouse "https://en.wikipedia.org/wiki/Bo_Lee"
"https://en.wikipedia.org/wiki/Lee_Street_(TV_series)" type TVSeries
"https://en.wikipedia.org/wiki/Lee_Street_(TV_series)" size 120000
"https://en.wikipedia.org/wiki/Lee_Street_(TV_series)" starring "https://en.wikipedia.org/wiki/Bo_Lee"
"https://en.wikipedia.org/wiki/Lee_Street_(TV_series)" starring "https://en.wikipedia.org/wiki/Ann_Lee"
"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let kb = KnowledgeBase::from_text(KB)?;
    println!(
        "{} entities, {} spouse and {} starring relations",
        kb.entity_count(),
        kb.relation_count(Predicate::Spouse),
        kb.relation_count(Predicate::Starring)
    );
    let policy = RelationRule::default();
    for iri in kb.entities() {
        let next = policy.infer(&kb, &kb.descriptor(iri)?)?;
        let names: Vec<&str> = next.iter().map(|d| d.entity_iri.as_str()).collect();
        println!("{iri} ({}) -> {names:?}", kb.kind_of(iri)?);
    }
    let capped = RelationRule {
        max_prefetch: Some(1),
    };
    let series = kb.descriptor("https://en.wikipedia.org/wiki/Lee_Street_(TV_series)")?;
    println!("capped at one: {:?}", capped.infer(&kb, &series)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
