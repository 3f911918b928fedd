//! Request metadata carried in an IPv6 hop-by-hop options extension header.
//!
//! A [`MetadataDescriptor`] is serialized into a compact canonical record
//! (`kind ‖ iri-length ‖ iri`) and split across one or more TLV options of a
//! hop-by-hop options header. The header never exceeds 2048 bytes on the wire,
//! which leaves room for at most 2030 bytes of metadata: eight options of up
//! to 255 data bytes, each costing two bytes of type/length framing, plus the
//! two fixed header bytes.
//!
//! Nodes that do not take part in caching skip the option (the two high bits
//! of the default option type are `00`).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest metadata payload a single hop-by-hop options header can carry.
pub const MAX_METADATA_BYTES: usize = 2030;
/// Upper bound on the wire size of the header.
pub const MAX_HEADER_BYTES: usize = 2048;
/// Maximum data length of a single TLV option.
pub const MAX_OPTION_DATA: usize = 255;
/// Size of a hop-by-hop header that carries nothing but padding.
pub const MIN_HEADER_BYTES: usize = 8;

/// RFC 4727 experimental option type, "skip if unrecognized".
pub const DEFAULT_OPTION_TYPE: u8 = 0x1E;
/// IPv6 "No Next Header".
pub const DEFAULT_NEXT_HEADER: u8 = 59;

const PAD1: u8 = 0x00;
const PADN: u8 = 0x01;
const FIXED_BYTES: usize = 2;
const TLV_OVERHEAD: usize = 2;
const RECORD_PREFIX: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error(
        "metadata serializes to {0} bytes, more than the {MAX_METADATA_BYTES} a header can hold"
    )]
    MetadataTooLarge(usize),
    #[error("metadata is empty")]
    EmptyMetadata,
    #[error("entity IRI contains a control character at byte {0}")]
    InvalidIri(usize),
    #[error("malformed hop-by-hop header: {0}")]
    MalformedHeader(String),
    #[error("header carries no metadata options")]
    NoMetadataOptions,
    #[error("metadata bytes are not a canonical record: {0}")]
    UnparseableMetadata(String),
}

/// The kind of entity a request is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Person,
    TVSeries,
    Other,
}

impl EntityKind {
    fn code(self) -> u8 {
        match self {
            EntityKind::Person => 1,
            EntityKind::TVSeries => 2,
            EntityKind::Other => 3,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(EntityKind::Person),
            2 => Some(EntityKind::TVSeries),
            3 => Some(EntityKind::Other),
            _ => None,
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Person => "Person",
            EntityKind::TVSeries => "TVSeries",
            EntityKind::Other => "Other",
        })
    }
}

impl std::str::FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Person" | "person" => Ok(EntityKind::Person),
            "TVSeries" | "tvseries" | "tv-series" => Ok(EntityKind::TVSeries),
            "Other" | "other" => Ok(EntityKind::Other),
            _ => Err(format!("unknown entity kind `{s}`")),
        }
    }
}

/// Semantic description of a request: what entity the user asked for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MetadataDescriptor {
    pub entity_iri: String,
    pub entity_kind: EntityKind,
}

impl MetadataDescriptor {
    pub fn new(entity_iri: impl Into<String>, entity_kind: EntityKind) -> Self {
        Self {
            entity_iri: entity_iri.into(),
            entity_kind,
        }
    }

    /// Length of the canonical record, without building it.
    pub fn serialized_len(&self) -> usize {
        RECORD_PREFIX + self.entity_iri.len()
    }

    fn validate(&self) -> Result<(), CodecError> {
        if self.entity_iri.is_empty() {
            return Err(CodecError::EmptyMetadata);
        }
        if let Some((pos, _)) = self.entity_iri.char_indices().find(|(_, c)| c.is_control()) {
            return Err(CodecError::InvalidIri(pos));
        }
        let len = self.serialized_len();
        if len > MAX_METADATA_BYTES {
            return Err(CodecError::MetadataTooLarge(len));
        }
        Ok(())
    }

    /// Canonical record: kind code, big-endian u16 IRI length, IRI bytes.
    pub fn to_canonical_bytes(&self) -> Result<Vec<u8>, CodecError> {
        self.validate()?;
        let iri = self.entity_iri.as_bytes();
        let mut out = Vec::with_capacity(self.serialized_len());
        out.push(self.entity_kind.code());
        out.extend_from_slice(&(iri.len() as u16).to_be_bytes());
        out.extend_from_slice(iri);
        Ok(out)
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < RECORD_PREFIX {
            return Err(CodecError::UnparseableMetadata(format!(
                "record of {} bytes is shorter than its prefix",
                bytes.len()
            )));
        }
        let kind = EntityKind::from_code(bytes[0]).ok_or_else(|| {
            CodecError::UnparseableMetadata(format!("unknown kind code {:#04x}", bytes[0]))
        })?;
        let declared = u16::from_be_bytes([bytes[1], bytes[2]]) as usize;
        let iri = &bytes[RECORD_PREFIX..];
        if declared != iri.len() {
            return Err(CodecError::UnparseableMetadata(format!(
                "declared IRI length {declared}, found {}",
                iri.len()
            )));
        }
        let iri = std::str::from_utf8(iri)
            .map_err(|e| CodecError::UnparseableMetadata(format!("IRI is not UTF-8: {e}")))?;
        let descriptor = MetadataDescriptor::new(iri, kind);
        descriptor
            .validate()
            .map_err(|e| CodecError::UnparseableMetadata(e.to_string()))?;
        Ok(descriptor)
    }
}

/// One entry of the options area.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HbhOption {
    /// A single zero byte of padding.
    Pad1,
    /// `n` bytes of zero data, framed as a TLV (`2 + n` bytes on the wire).
    PadN(u8),
    Tlv {
        option_type: u8,
        data: Vec<u8>,
    },
}

impl HbhOption {
    pub fn wire_len(&self) -> usize {
        match self {
            HbhOption::Pad1 => 1,
            HbhOption::PadN(n) => TLV_OVERHEAD + *n as usize,
            HbhOption::Tlv { data, .. } => TLV_OVERHEAD + data.len(),
        }
    }

    fn is_padding(&self) -> bool {
        matches!(self, HbhOption::Pad1 | HbhOption::PadN(_))
    }
}

/// IPv6 hop-by-hop options extension header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopByHopHeader {
    pub next_header: u8,
    /// Length in 8-octet units, not counting the first 8 octets.
    pub hdr_ext_len: u8,
    pub options: Vec<HbhOption>,
}

impl HopByHopHeader {
    /// Wire size declared by `hdr_ext_len`.
    pub fn declared_len(&self) -> usize {
        8 * (self.hdr_ext_len as usize + 1)
    }

    /// Wire size implied by the options actually present.
    pub fn options_len(&self) -> usize {
        FIXED_BYTES + self.options.iter().map(HbhOption::wire_len).sum::<usize>()
    }

    pub fn wire_size(&self) -> usize {
        self.declared_len()
    }

    fn check_consistent(&self) -> Result<(), CodecError> {
        let actual = self.options_len();
        if actual != self.declared_len() {
            return Err(CodecError::MalformedHeader(format!(
                "hdr_ext_len declares {} bytes, options occupy {actual}",
                self.declared_len()
            )));
        }
        if actual > MAX_HEADER_BYTES {
            return Err(CodecError::MalformedHeader(format!(
                "header of {actual} bytes exceeds {MAX_HEADER_BYTES}"
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.options_len());
        out.push(self.next_header);
        out.push(self.hdr_ext_len);
        for option in &self.options {
            match option {
                HbhOption::Pad1 => out.push(PAD1),
                HbhOption::PadN(n) => {
                    out.push(PADN);
                    out.push(*n);
                    out.extend(std::iter::repeat_n(0, *n as usize));
                }
                HbhOption::Tlv { option_type, data } => {
                    out.push(*option_type);
                    out.push(data.len() as u8);
                    out.extend_from_slice(data);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < MIN_HEADER_BYTES {
            return Err(CodecError::MalformedHeader(format!(
                "{} bytes is shorter than the minimal header",
                bytes.len()
            )));
        }
        let next_header = bytes[0];
        let hdr_ext_len = bytes[1];
        let declared = 8 * (hdr_ext_len as usize + 1);
        if declared != bytes.len() {
            return Err(CodecError::MalformedHeader(format!(
                "hdr_ext_len declares {declared} bytes, buffer holds {}",
                bytes.len()
            )));
        }
        let mut options = Vec::new();
        let mut pos = FIXED_BYTES;
        while pos < bytes.len() {
            let option_type = bytes[pos];
            if option_type == PAD1 {
                options.push(HbhOption::Pad1);
                pos += 1;
                continue;
            }
            let len = *bytes.get(pos + 1).ok_or_else(|| {
                CodecError::MalformedHeader(format!("option at offset {pos} has no length byte"))
            })? as usize;
            let data = bytes.get(pos + 2..pos + 2 + len).ok_or_else(|| {
                CodecError::MalformedHeader(format!(
                    "option at offset {pos} runs past the end of the header"
                ))
            })?;
            if option_type == PADN {
                options.push(HbhOption::PadN(len as u8));
            } else {
                options.push(HbhOption::Tlv {
                    option_type,
                    data: data.to_vec(),
                });
            }
            pos += 2 + len;
        }
        let header = HopByHopHeader {
            next_header,
            hdr_ext_len,
            options,
        };
        header.check_consistent()?;
        Ok(header)
    }
}

/// Encoder/decoder for metadata headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetadataCodec {
    pub option_type: u8,
    pub next_header: u8,
}

impl Default for MetadataCodec {
    fn default() -> Self {
        Self {
            option_type: DEFAULT_OPTION_TYPE,
            next_header: DEFAULT_NEXT_HEADER,
        }
    }
}

fn padded_len(payload: usize) -> usize {
    let options = payload.div_ceil(MAX_OPTION_DATA);
    let raw = FIXED_BYTES + options * TLV_OVERHEAD + payload;
    raw.div_ceil(8) * 8
}

fn padding(len: usize) -> Option<HbhOption> {
    match len {
        0 => None,
        1 => Some(HbhOption::Pad1),
        n => Some(HbhOption::PadN((n - TLV_OVERHEAD) as u8)),
    }
}

impl MetadataCodec {
    pub fn with_option_type(option_type: u8) -> Self {
        Self {
            option_type,
            ..Self::default()
        }
    }

    pub fn encode(&self, descriptor: &MetadataDescriptor) -> Result<HopByHopHeader, CodecError> {
        let payload = descriptor.to_canonical_bytes()?;
        let mut options: Vec<HbhOption> = payload
            .chunks(MAX_OPTION_DATA)
            .map(|chunk| HbhOption::Tlv {
                option_type: self.option_type,
                data: chunk.to_vec(),
            })
            .collect();
        let raw = FIXED_BYTES + options.iter().map(HbhOption::wire_len).sum::<usize>();
        let total = padded_len(payload.len());
        options.extend(padding(total - raw));
        debug_assert!(total <= MAX_HEADER_BYTES);
        Ok(HopByHopHeader {
            next_header: self.next_header,
            hdr_ext_len: (total / 8 - 1) as u8,
            options,
        })
    }

    /// Concatenated data of the metadata-bearing options, in order.
    pub fn metadata_bytes(&self, header: &HopByHopHeader) -> Result<Vec<u8>, CodecError> {
        header.check_consistent()?;
        let mut out = Vec::new();
        let mut found = false;
        for option in header.options.iter().filter(|o| !o.is_padding()) {
            if let HbhOption::Tlv { option_type, data } = option {
                if *option_type == self.option_type {
                    found = true;
                    out.extend_from_slice(data);
                }
            }
        }
        if !found {
            return Err(CodecError::NoMetadataOptions);
        }
        if out.len() > MAX_METADATA_BYTES {
            return Err(CodecError::MalformedHeader(format!(
                "{} metadata bytes exceed {MAX_METADATA_BYTES}",
                out.len()
            )));
        }
        Ok(out)
    }

    pub fn decode(&self, header: &HopByHopHeader) -> Result<MetadataDescriptor, CodecError> {
        let bytes = self.metadata_bytes(header)?;
        MetadataDescriptor::from_canonical_bytes(&bytes)
    }

    pub fn decode_bytes(&self, wire: &[u8]) -> Result<MetadataDescriptor, CodecError> {
        self.decode(&HopByHopHeader::from_bytes(wire)?)
    }

    /// Wire size `encode` would produce, computed arithmetically.
    pub fn wire_size(&self, descriptor: &MetadataDescriptor) -> Result<usize, CodecError> {
        descriptor.validate()?;
        Ok(padded_len(descriptor.serialized_len()))
    }
}

/// Encodes with the default codec.
pub fn encode_metadata(descriptor: &MetadataDescriptor) -> Result<HopByHopHeader, CodecError> {
    MetadataCodec::default().encode(descriptor)
}

/// Decodes with the default codec.
pub fn decode_metadata(header: &HopByHopHeader) -> Result<MetadataDescriptor, CodecError> {
    MetadataCodec::default().decode(header)
}

pub fn wire_size(descriptor: &MetadataDescriptor) -> Result<usize, CodecError> {
    MetadataCodec::default().wire_size(descriptor)
}
