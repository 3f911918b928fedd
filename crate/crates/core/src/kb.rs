//! Directed triple store over people and television series, and the
//! inference policies that turn a request into prefetch candidates.
//!
//! File format, one statement per line, `#` starts a comment:
//!
//! ```text
//! "https://en.wikipedia.org/wiki/A" spouse "https://en.wikipedia.org/wiki/B"
//! "https://en.wikipedia.org/wiki/S" starring "https://en.wikipedia.org/wiki/A"
//! "https://en.wikipedia.org/wiki/A" type Person
//! "https://en.wikipedia.org/wiki/A" size 40960
//! ```
//!
//! IRIs may be written bare when they contain no whitespace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use thiserror::Error;

use crate::codec::{EntityKind, MetadataDescriptor};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: entity `{iri}` has no size declaration")]
    MissingSize { iri: String, line: usize },
    #[error("line {line}: entity `{iri}` has no type declaration")]
    MissingType { iri: String, line: usize },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("failed to read knowledge base: {0}")]
    Io(#[from] std::io::Error),
}

impl KbError {
    pub fn line(&self) -> Option<usize> {
        match self {
            KbError::Parse { line, .. }
            | KbError::MissingSize { line, .. }
            | KbError::MissingType { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Spouse,
    Starring,
    TypeOf,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Predicate::Spouse => "spouse",
            Predicate::Starring => "starring",
            Predicate::TypeOf => "type",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub predicate: Predicate,
    /// An entity IRI, or the kind literal for `TypeOf`.
    pub object: String,
}

/// Immutable after loading; share it freely between readers.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    triples: BTreeSet<Triple>,
    sizes: BTreeMap<String, u64>,
    kinds: BTreeMap<String, EntityKind>,
    // subject -> predicate -> sorted objects
    relations: BTreeMap<String, BTreeMap<Predicate, Vec<String>>>,
}

fn tokenize(line: &str, lineno: usize) -> Result<Vec<String>, KbError> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.next_if(|c| c.is_whitespace()).is_some() {}
        match chars.peek() {
            None | Some('#') => break,
            Some('"') => {
                chars.next();
                let mut tok = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some(c) => tok.push(c),
                        None => {
                            return Err(KbError::Parse {
                                line: lineno,
                                message: "unterminated quoted IRI".into(),
                            })
                        }
                    }
                }
                tokens.push(tok);
            }
            Some(_) => {
                let mut tok = String::new();
                while let Some(c) = chars.next_if(|c| !c.is_whitespace()) {
                    tok.push(c);
                }
                tokens.push(tok);
            }
        }
    }
    Ok(tokens)
}

fn parse_err(line: usize, message: impl Into<String>) -> KbError {
    KbError::Parse {
        line,
        message: message.into(),
    }
}

impl KnowledgeBase {
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, KbError> {
        let mut triples = BTreeSet::new();
        let mut sizes: BTreeMap<String, u64> = BTreeMap::new();
        let mut kinds: BTreeMap<String, EntityKind> = BTreeMap::new();
        // first line each entity is mentioned on, for error reporting
        let mut first_seen: BTreeMap<String, usize> = BTreeMap::new();

        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let tokens = tokenize(&line, lineno)?;
            if tokens.is_empty() {
                continue;
            }
            let [subject, predicate, object] = <[String; 3]>::try_from(tokens)
                .map_err(|t| parse_err(lineno, format!("expected 3 fields, found {}", t.len())))?;
            if subject.is_empty() {
                return Err(parse_err(lineno, "empty subject IRI"));
            }
            first_seen.entry(subject.clone()).or_insert(lineno);
            match predicate.as_str() {
                "spouse" | "starring" => {
                    if object.is_empty() {
                        return Err(parse_err(lineno, "empty object IRI"));
                    }
                    first_seen.entry(object.clone()).or_insert(lineno);
                    let predicate = if predicate == "spouse" {
                        Predicate::Spouse
                    } else {
                        Predicate::Starring
                    };
                    triples.insert(Triple {
                        subject,
                        predicate,
                        object,
                    });
                }
                "type" => {
                    let kind = match object.as_str() {
                        "Person" => EntityKind::Person,
                        "TVSeries" => EntityKind::TVSeries,
                        other => {
                            return Err(parse_err(
                                lineno,
                                format!("type must be Person or TVSeries, found `{other}`"),
                            ))
                        }
                    };
                    if let Some(prev) = kinds.insert(subject.clone(), kind) {
                        if prev != kind {
                            return Err(parse_err(
                                lineno,
                                format!("`{subject}` declared both {prev} and {kind}"),
                            ));
                        }
                    }
                    triples.insert(Triple {
                        subject,
                        predicate: Predicate::TypeOf,
                        object,
                    });
                }
                "size" => {
                    let size: u64 = object
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("invalid size `{object}`")))?;
                    if size == 0 {
                        return Err(parse_err(lineno, "content size must be positive"));
                    }
                    if let Some(prev) = sizes.insert(subject.clone(), size) {
                        if prev != size {
                            return Err(parse_err(
                                lineno,
                                format!("`{subject}` declared sizes {prev} and {size}"),
                            ));
                        }
                    }
                }
                other => return Err(parse_err(lineno, format!("unknown predicate `{other}`"))),
            }
        }

        let mut by_line: Vec<(&String, &usize)> = first_seen.iter().collect();
        by_line.sort_by_key(|(iri, line)| (**line, (*iri).clone()));
        for (iri, &line) in by_line {
            if !sizes.contains_key(iri) {
                return Err(KbError::MissingSize {
                    iri: iri.clone(),
                    line,
                });
            }
            if !kinds.contains_key(iri) {
                return Err(KbError::MissingType {
                    iri: iri.clone(),
                    line,
                });
            }
        }

        let mut relations: BTreeMap<String, BTreeMap<Predicate, Vec<String>>> = BTreeMap::new();
        for t in triples.iter().filter(|t| t.predicate != Predicate::TypeOf) {
            relations
                .entry(t.subject.clone())
                .or_default()
                .entry(t.predicate)
                .or_default()
                .push(t.object.clone());
        }
        // BTreeSet iteration already yields objects in lexicographic order.

        Ok(Self {
            triples,
            sizes,
            kinds,
            relations,
        })
    }

    pub fn from_text(text: &str) -> Result<Self, KbError> {
        Self::from_reader(text.as_bytes())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, KbError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn relation_count(&self, predicate: Predicate) -> usize {
        self.triples
            .iter()
            .filter(|t| t.predicate == predicate)
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn entity_count(&self) -> usize {
        self.kinds.len()
    }

    /// All entities, sorted by IRI.
    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.kinds.keys().map(String::as_str)
    }

    pub fn contains(&self, iri: &str) -> bool {
        self.kinds.contains_key(iri)
    }

    pub fn kind_of(&self, iri: &str) -> Result<EntityKind, KbError> {
        self.kinds
            .get(iri)
            .copied()
            .ok_or_else(|| KbError::UnknownEntity(iri.to_string()))
    }

    pub fn content_size_of(&self, iri: &str) -> Result<u64, KbError> {
        self.sizes
            .get(iri)
            .copied()
            .ok_or_else(|| KbError::UnknownEntity(iri.to_string()))
    }

    pub fn descriptor(&self, iri: &str) -> Result<MetadataDescriptor, KbError> {
        Ok(MetadataDescriptor::new(iri, self.kind_of(iri)?))
    }

    /// Objects of `predicate` for `subject`, lexicographically ordered.
    pub fn objects(&self, subject: &str, predicate: Predicate) -> &[String] {
        self.relations
            .get(subject)
            .and_then(|m| m.get(&predicate))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn total_content_bytes(&self) -> u64 {
        self.sizes.values().sum()
    }
}

/// One-hop inference: the spouses of a person, the stars of a series.
pub fn infer_next(
    kb: &KnowledgeBase,
    current: &MetadataDescriptor,
) -> Result<Vec<MetadataDescriptor>, KbError> {
    let predicate = match kb.kind_of(&current.entity_iri)? {
        EntityKind::Person => Predicate::Spouse,
        EntityKind::TVSeries => Predicate::Starring,
        EntityKind::Other => return Ok(Vec::new()),
    };
    kb.objects(&current.entity_iri, predicate)
        .iter()
        .map(|iri| kb.descriptor(iri))
        .collect()
}

/// Decides what to prefetch after a request reaches the cache.
pub trait InferencePolicy: Send + Sync {
    fn name(&self) -> &str;

    fn infer(
        &self,
        kb: &KnowledgeBase,
        current: &MetadataDescriptor,
    ) -> Result<Vec<MetadataDescriptor>, KbError>;
}

/// Spouse/starring rule with an optional cap on prefetches per request.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RelationRule {
    pub max_prefetch: Option<usize>,
}

impl InferencePolicy for RelationRule {
    fn name(&self) -> &str {
        "relation"
    }

    fn infer(
        &self,
        kb: &KnowledgeBase,
        current: &MetadataDescriptor,
    ) -> Result<Vec<MetadataDescriptor>, KbError> {
        let mut out = infer_next(kb, current)?;
        if let Some(cap) = self.max_prefetch {
            out.truncate(cap);
        }
        Ok(out)
    }
}

/// Never predicts anything; turns semantic caching into plain caching.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NullPolicy;

impl InferencePolicy for NullPolicy {
    fn name(&self) -> &str {
        "null"
    }

    fn infer(
        &self,
        kb: &KnowledgeBase,
        current: &MetadataDescriptor,
    ) -> Result<Vec<MetadataDescriptor>, KbError> {
        kb.kind_of(&current.entity_iri)?;
        Ok(Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SMALL: &str = r#"
# two people
"wiki/A" spouse "wiki/B"
"wiki/A" type Person
"wiki/B" type Person
"wiki/A" size 40960
"wiki/B" size 1000
"#;

    #[test]
    fn loads_small_fixture() {
        let kb = KnowledgeBase::from_text(SMALL).unwrap();
        // counting oracle over the fixture text
        let spouse_lines = SMALL.lines().filter(|l| l.contains(" spouse ")).count();
        assert_eq!(kb.relation_count(Predicate::Spouse), spouse_lines);
        assert_eq!(kb.relation_count(Predicate::Spouse), 1);
        assert_eq!(kb.entity_count(), 2);
        assert_eq!(kb.content_size_of("wiki/A").unwrap(), 40960);
        assert_eq!(kb.content_size_of("wiki/A").unwrap(), 40960);
    }

    #[test]
    fn bare_iris_and_duplicates() {
        let text = "wiki/A spouse wiki/B\nwiki/A spouse wiki/B\nwiki/A type Person\n\
                    wiki/B type Person\nwiki/A size 1\nwiki/B size 2\n";
        let kb = KnowledgeBase::from_text(text).unwrap();
        assert_eq!(kb.relation_count(Predicate::Spouse), 1);
    }

    #[test]
    fn line_order_is_irrelevant() {
        let mut lines: Vec<&str> = SMALL.lines().collect();
        lines.reverse();
        let a = KnowledgeBase::from_text(SMALL).unwrap();
        let b = KnowledgeBase::from_text(&lines.join("\n")).unwrap();
        assert_eq!(a.triples, b.triples);
        assert_eq!(a.sizes, b.sizes);
    }

    #[test]
    fn empty_file_is_empty_kb() {
        let kb = KnowledgeBase::from_text("# nothing\n\n").unwrap();
        assert!(kb.is_empty());
        assert_eq!(kb.triple_count(), 0);
    }

    #[test]
    fn missing_size_names_line() {
        let text = "\"wiki/A\" spouse \"wiki/C\"\n\"wiki/A\" type Person\n\
                    \"wiki/C\" type Person\n\"wiki/A\" size 10\n";
        match KnowledgeBase::from_text(text) {
            Err(KbError::MissingSize { iri, line }) => {
                assert_eq!(iri, "wiki/C");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_type_is_reported() {
        let text = "wiki/A size 10\n";
        assert!(matches!(
            KnowledgeBase::from_text(text),
            Err(KbError::MissingType { line: 1, .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, line) in [
            ("wiki/A type Person\nwiki/A size ten\n", 2),
            ("wiki/A likes wiki/B\n", 1),
            ("\n\nwiki/A size\n", 3),
            ("\"wiki/A size 3\n", 1),
            ("wiki/A type Dog\n", 1),
            ("wiki/A size 0\n", 1),
            ("wiki/A type Person\nwiki/A type TVSeries\n", 2),
        ] {
            let err = KnowledgeBase::from_text(text).unwrap_err();
            assert!(matches!(err, KbError::Parse { .. }), "{text:?}: {err}");
            assert_eq!(err.line(), Some(line), "{text:?}");
        }
    }

    fn series_kb() -> KnowledgeBase {
        let mut text = String::new();
        for iri in ["Zed", "Amy", "Moe", "Alice", "Bob"] {
            text.push_str(&format!("wiki/{iri} type Person\nwiki/{iri} size 100\n"));
        }
        text.push_str(
            "wiki/Show type TVSeries\nwiki/Show size 500\n\
             wiki/Show starring wiki/Zed\nwiki/Show starring wiki/Amy\n\
             wiki/Show starring wiki/Moe\nwiki/Alice spouse wiki/Bob\n\
             wiki/Carol type Person\nwiki/Carol size 10\n",
        );
        KnowledgeBase::from_text(&text).unwrap()
    }

    #[test]
    fn person_infers_spouse() {
        let kb = series_kb();
        let alice = kb.descriptor("wiki/Alice").unwrap();
        assert_eq!(
            infer_next(&kb, &alice).unwrap(),
            vec![MetadataDescriptor::new("wiki/Bob", EntityKind::Person)]
        );
    }

    #[test]
    fn series_infers_stars_in_order() {
        let kb = series_kb();
        let show = kb.descriptor("wiki/Show").unwrap();
        let got: Vec<String> = infer_next(&kb, &show)
            .unwrap()
            .into_iter()
            .map(|d| d.entity_iri)
            .collect();
        assert_eq!(got, vec!["wiki/Amy", "wiki/Moe", "wiki/Zed"]);
    }

    #[test]
    fn unrelated_person_infers_nothing() {
        let kb = series_kb();
        let carol = kb.descriptor("wiki/Carol").unwrap();
        assert!(infer_next(&kb, &carol).unwrap().is_empty());
        // spouse is directed: Bob has no outgoing spouse triple
        let bob = kb.descriptor("wiki/Bob").unwrap();
        assert!(infer_next(&kb, &bob).unwrap().is_empty());
    }

    #[test]
    fn unknown_entity_errors() {
        let kb = series_kb();
        let ghost = MetadataDescriptor::new("wiki/Ghost", EntityKind::Person);
        assert!(matches!(
            infer_next(&kb, &ghost),
            Err(KbError::UnknownEntity(_))
        ));
        assert!(matches!(
            kb.content_size_of("wiki/Ghost"),
            Err(KbError::UnknownEntity(_))
        ));
        assert!(NullPolicy.infer(&kb, &ghost).is_err());
    }

    #[test]
    fn prefetch_cap_truncates() {
        let kb = series_kb();
        let show = kb.descriptor("wiki/Show").unwrap();
        let capped = RelationRule {
            max_prefetch: Some(2),
        };
        assert_eq!(capped.infer(&kb, &show).unwrap().len(), 2);
        assert_eq!(RelationRule::default().infer(&kb, &show).unwrap().len(), 3);
        assert!(NullPolicy.infer(&kb, &show).unwrap().is_empty());
    }

    fn arb_kb() -> impl Strategy<Value = KnowledgeBase> {
        (
            2usize..12,
            proptest::collection::vec((0usize..12, 0usize..12, any::<bool>()), 0..30),
        )
            .prop_map(|(n, edges)| {
                let mut text = String::new();
                for i in 0..n {
                    let kind = if i % 3 == 0 { "TVSeries" } else { "Person" };
                    text.push_str(&format!("e{i} type {kind}\ne{i} size {}\n", 10 + i));
                }
                for (s, o, spouse) in edges {
                    let pred = if spouse { "spouse" } else { "starring" };
                    text.push_str(&format!("e{} {pred} e{}\n", s % n, o % n));
                }
                KnowledgeBase::from_text(&text).unwrap()
            })
    }

    proptest! {
        #[test]
        fn prop_inference_is_closed_pure_and_irreflexive(kb in arb_kb()) {
            for iri in kb.entities() {
                let d = kb.descriptor(iri).unwrap();
                let first = infer_next(&kb, &d).unwrap();
                prop_assert_eq!(&first, &infer_next(&kb, &d).unwrap());
                for next in &first {
                    prop_assert!(kb.contains(&next.entity_iri));
                    if next.entity_iri == d.entity_iri {
                        let self_loop = kb.triples().any(|t| {
                            t.subject == *iri && t.object == *iri && t.predicate != Predicate::TypeOf
                        });
                        prop_assert!(self_loop);
                    }
                }
                let mut sorted = first.clone();
                sorted.sort_by(|a, b| a.entity_iri.cmp(&b.entity_iri));
                prop_assert_eq!(first, sorted);
            }
        }
    }
}
