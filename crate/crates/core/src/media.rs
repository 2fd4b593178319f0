//! Typed payloads flowing between pieces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::modality::{BaseModality, Modality};
use crate::mosaic::InstanceId;
use crate::piece::ParamMap;

/// Lowercase hex SHA-256 of some bytes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ContentHash(String);

impl ContentHash {
    pub fn of(bytes: &[u8]) -> Self {
        ContentHash(hex::encode(Sha256::digest(bytes)))
    }

    /// Hash of several hashes, order-sensitive.
    pub fn combine<'a>(parts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut hasher = Sha256::new();
        for part in parts {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part.as_bytes());
        }
        ContentHash(hex::encode(hasher.finalize()))
    }

    pub fn of_params(params: &ParamMap) -> Self {
        ContentHash::of(&serde_json::to_vec(params).expect("params serialize"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ContentHash {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            Ok(ContentHash(s.to_string()))
        } else {
            Err(format!("`{s}` is not a lowercase hex sha-256"))
        }
    }
}

impl TryFrom<String> for ContentHash {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ContentHash> for String {
    fn from(h: ContentHash) -> Self {
        h.0
    }
}

/// File format of a blob payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatTag {
    Png,
    Jpeg,
    Svg,
    Mp4,
    Webm,
    Glb,
    Obj,
    Wav,
    Mp3,
}

impl FormatTag {
    pub const ALL: [FormatTag; 9] = [
        FormatTag::Png,
        FormatTag::Jpeg,
        FormatTag::Svg,
        FormatTag::Mp4,
        FormatTag::Webm,
        FormatTag::Glb,
        FormatTag::Obj,
        FormatTag::Wav,
        FormatTag::Mp3,
    ];

    pub fn extension(self) -> &'static str {
        match self {
            FormatTag::Png => "png",
            FormatTag::Jpeg => "jpg",
            FormatTag::Svg => "svg",
            FormatTag::Mp4 => "mp4",
            FormatTag::Webm => "webm",
            FormatTag::Glb => "glb",
            FormatTag::Obj => "obj",
            FormatTag::Wav => "wav",
            FormatTag::Mp3 => "mp3",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            FormatTag::Png => "image/png",
            FormatTag::Jpeg => "image/jpeg",
            FormatTag::Svg => "image/svg+xml",
            FormatTag::Mp4 => "video/mp4",
            FormatTag::Webm => "video/webm",
            FormatTag::Glb => "model/gltf-binary",
            FormatTag::Obj => "model/obj",
            FormatTag::Wav => "audio/wav",
            FormatTag::Mp3 => "audio/mpeg",
        }
    }

    pub fn from_extension(ext: &str) -> Option<FormatTag> {
        let ext = ext.trim_start_matches('.').to_ascii_lowercase();
        if ext == "jpeg" {
            return Some(FormatTag::Jpeg);
        }
        FormatTag::ALL.into_iter().find(|f| f.extension() == ext)
    }

    pub fn from_content_type(ct: &str) -> Option<FormatTag> {
        let ct = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        FormatTag::ALL.into_iter().find(|f| f.content_type() == ct)
    }

    /// Which base modalities may carry this format.
    pub fn suits(self, base: BaseModality) -> bool {
        matches!(
            (base, self),
            (BaseModality::Image | BaseModality::Sketch, FormatTag::Png | FormatTag::Jpeg | FormatTag::Svg)
                | (BaseModality::Video, FormatTag::Mp4 | FormatTag::Webm)
                | (BaseModality::ThreeD, FormatTag::Glb | FormatTag::Obj)
                | (BaseModality::Audio, FormatTag::Wav | FormatTag::Mp3)
        )
    }

    /// Format produced by mock adapters; `None` for text, which is inline.
    pub fn default_for(base: BaseModality) -> Option<FormatTag> {
        match base {
            BaseModality::Text => None,
            BaseModality::Image | BaseModality::Sketch => Some(FormatTag::Png),
            BaseModality::Video => Some(FormatTag::Mp4),
            BaseModality::ThreeD => Some(FormatTag::Glb),
            BaseModality::Audio => Some(FormatTag::Wav),
        }
    }

    /// Guesses the format from leading magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<FormatTag> {
        if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
            Some(FormatTag::Png)
        } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
            Some(FormatTag::Jpeg)
        } else if bytes.len() >= 12 && &bytes[4..8] == b"ftyp" {
            Some(FormatTag::Mp4)
        } else if bytes.starts_with(&[0x1A, 0x45, 0xDF, 0xA3]) {
            Some(FormatTag::Webm)
        } else if bytes.starts_with(b"glTF") {
            Some(FormatTag::Glb)
        } else if bytes.len() >= 12 && bytes.starts_with(b"RIFF") && &bytes[8..12] == b"WAVE" {
            Some(FormatTag::Wav)
        } else if bytes.starts_with(b"ID3") || bytes.starts_with(&[0xFF, 0xFB]) {
            Some(FormatTag::Mp3)
        } else {
            let head = String::from_utf8_lossy(&bytes[..bytes.len().min(256)]).to_string();
            let head = head.trim_start();
            if head.starts_with("<svg") || (head.starts_with("<?xml") && head.contains("<svg")) {
                Some(FormatTag::Svg)
            } else if head.starts_with("v ") || head.starts_with("# ") && head.contains("\nv ") {
                Some(FormatTag::Obj)
            } else {
                None
            }
        }
    }
}

impl fmt::Display for FormatTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Text { text: String },
    Blob { hash: ContentHash, format: FormatTag },
}

/// Who produced a value: the user, a piece instance, or a glue step run
/// outside any mosaic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Producer {
    UserInput,
    Standalone,
    Instance(InstanceId),
}

impl Serialize for Producer {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Producer::UserInput => serializer.serialize_str("user-input"),
            Producer::Standalone => serializer.serialize_str("standalone"),
            Producer::Instance(id) => id.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Producer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Id(InstanceId),
            Tag(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Id(id) => Ok(Producer::Instance(id)),
            Raw::Tag(s) if s == "user-input" => Ok(Producer::UserInput),
            Raw::Tag(s) if s == "standalone" => Ok(Producer::Standalone),
            Raw::Tag(s) => Err(serde::de::Error::custom(format!("unknown producer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub producer: Producer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_hash: Option<ContentHash>,
    #[serde(default)]
    pub input_hashes: Vec<ContentHash>,
    /// Exact LLM prompt, for values produced by glue pieces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

impl Provenance {
    pub fn user() -> Self {
        Provenance { producer: Producer::UserInput, params_hash: None, input_hashes: Vec::new(), prompt: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaValue {
    pub modality: Modality,
    pub payload: Payload,
    pub provenance: Provenance,
}

impl MediaValue {
    pub fn user_text(text: impl Into<String>) -> Self {
        MediaValue {
            modality: Modality::TEXT,
            payload: Payload::Text { text: text.into() },
            provenance: Provenance::user(),
        }
    }

    pub fn user_blob(modality: Modality, hash: ContentHash, format: FormatTag) -> Self {
        MediaValue { modality, payload: Payload::Blob { hash, format }, provenance: Provenance::user() }
    }

    /// Hash of the payload content: the text bytes, or the blob's hash.
    pub fn content_hash(&self) -> ContentHash {
        match &self.payload {
            Payload::Text { text } => ContentHash::of(text.as_bytes()),
            Payload::Blob { hash, .. } => hash.clone(),
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match &self.payload {
            Payload::Text { text } => Some(text),
            Payload::Blob { .. } => None,
        }
    }

    pub fn format(&self) -> Option<FormatTag> {
        match &self.payload {
            Payload::Text { .. } => None,
            Payload::Blob { format, .. } => Some(*format),
        }
    }

    /// Text modality carries inline text; every other base carries a blob
    /// in a format suited to it.
    pub fn payload_matches_modality(&self) -> bool {
        match (&self.payload, self.modality.base()) {
            (Payload::Text { .. }, BaseModality::Text) => true,
            (Payload::Blob { format, .. }, base) => base != BaseModality::Text && format.suits(base),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            ContentHash::of(b"").as_str(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert!("xyz".parse::<ContentHash>().is_err());
    }

    #[test]
    fn combine_is_order_sensitive_and_unambiguous() {
        assert_ne!(ContentHash::combine(["a", "b"]), ContentHash::combine(["b", "a"]));
        assert_ne!(ContentHash::combine(["ab", "c"]), ContentHash::combine(["a", "bc"]));
    }

    #[test]
    fn producer_serde() {
        assert_eq!(serde_json::to_string(&Producer::UserInput).unwrap(), "\"user-input\"");
        assert_eq!(serde_json::to_string(&Producer::Instance(InstanceId(4))).unwrap(), "4");
        let p: Producer = serde_json::from_str("4").unwrap();
        assert_eq!(p, Producer::Instance(InstanceId(4)));
    }

    #[test]
    fn payload_consistency() {
        let t = MediaValue::user_text("hi");
        assert!(t.payload_matches_modality());
        let h = ContentHash::of(b"x");
        assert!(MediaValue::user_blob(Modality::IMAGE, h.clone(), FormatTag::Png).payload_matches_modality());
        assert!(!MediaValue::user_blob(Modality::IMAGE, h.clone(), FormatTag::Wav).payload_matches_modality());
        assert!(!MediaValue::user_blob(Modality::TEXT, h, FormatTag::Png).payload_matches_modality());
    }

    #[test]
    fn sniffing() {
        assert_eq!(FormatTag::sniff(b"\x89PNG\r\n\x1a\nrest"), Some(FormatTag::Png));
        assert_eq!(FormatTag::sniff(b"RIFF\0\0\0\0WAVEfmt "), Some(FormatTag::Wav));
        assert_eq!(FormatTag::sniff(b"glTF\x02\0\0\0"), Some(FormatTag::Glb));
        assert_eq!(FormatTag::sniff(b"\0\0\0\x18ftypisom"), Some(FormatTag::Mp4));
        assert_eq!(FormatTag::sniff(b"<svg xmlns=''/>"), Some(FormatTag::Svg));
        assert_eq!(FormatTag::sniff(b"hello"), None);
        assert_eq!(FormatTag::from_extension("JPEG"), Some(FormatTag::Jpeg));
    }
}
