// Encode a request description into a hop-by-hop options header and back.

use semcache::codec::{HbhOption, MetadataCodec, MAX_METADATA_BYTES};
use semcache::{EntityKind, MetadataDescriptor};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let codec = MetadataCodec::default();
    let descriptor =
        MetadataDescriptor::new("https://en.wikipedia.org/wiki/Ann_Lee", EntityKind::Person);
    let header = codec.encode(&descriptor)?;
    let wire = header.to_bytes();
    println!(
        "{} -> {} bytes on the wire",
        descriptor.entity_iri,
        wire.len()
    );
    println!("  {}", hex::encode(&wire));
    for option in &header.options {
        match option {
            HbhOption::Tlv { option_type, data } => {
                println!("  option 0x{option_type:02x}: {} data bytes", data.len())
            }
            pad => println!("  padding: {} bytes", pad.wire_len()),
        }
    }
    assert_eq!(codec.decode_bytes(&wire)?, descriptor);

    // the largest record that fits
    let long = MetadataDescriptor::new("x".repeat(MAX_METADATA_BYTES - 3), EntityKind::Other);
    let header = codec.encode(&long)?;
    println!(
        "{}-byte record -> {}-byte header in {} options",
        long.serialized_len(),
        header.wire_size(),
        header.options.len()
    );
    let too_long = MetadataDescriptor::new("x".repeat(MAX_METADATA_BYTES - 2), EntityKind::Other);
    println!("one byte more: {}", codec.encode(&too_long).unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
