//! Media types carried by piece sockets.
//!
//! A [`Modality`] is one of six base types, optionally narrowed by a
//! refinement tag (an image that is specifically a depth map, audio that is
//! specifically music). The wire form is `base` or `base/refinement`, e.g.
//! `image/depth`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseModality {
    Text,
    Image,
    Video,
    ThreeD,
    Audio,
    Sketch,
}

impl BaseModality {
    pub const ALL: [BaseModality; 6] = [
        BaseModality::Text,
        BaseModality::Image,
        BaseModality::Video,
        BaseModality::ThreeD,
        BaseModality::Audio,
        BaseModality::Sketch,
    ];

    /// Lowercase wire name (`3d` for three-dimensional models).
    pub fn as_str(self) -> &'static str {
        match self {
            BaseModality::Text => "text",
            BaseModality::Image => "image",
            BaseModality::Video => "video",
            BaseModality::ThreeD => "3d",
            BaseModality::Audio => "audio",
            BaseModality::Sketch => "sketch",
        }
    }

    /// Name used inside prose prompts, e.g. `text-to-3D`.
    pub fn prose_name(self) -> &'static str {
        match self {
            BaseModality::ThreeD => "3D",
            other => other.as_str(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BaseModality::Text => "Text",
            BaseModality::Image => "Image",
            BaseModality::Video => "Video",
            BaseModality::ThreeD => "3D",
            BaseModality::Audio => "Audio",
            BaseModality::Sketch => "Sketch",
        }
    }
}

impl fmt::Display for BaseModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaseModality {
    type Err = ModalityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaseModality::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModalityError::UnknownBase(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Refinement {
    Pose,
    Segmentation,
    Depth,
    Normal,
    Edge,
    SoundEffects,
    Music,
    Speech,
}

impl Refinement {
    pub const ALL: [Refinement; 8] = [
        Refinement::Pose,
        Refinement::Segmentation,
        Refinement::Depth,
        Refinement::Normal,
        Refinement::Edge,
        Refinement::SoundEffects,
        Refinement::Music,
        Refinement::Speech,
    ];

    /// The only base this refinement may narrow.
    pub fn base(self) -> BaseModality {
        match self {
            Refinement::Pose
            | Refinement::Segmentation
            | Refinement::Depth
            | Refinement::Normal
            | Refinement::Edge => BaseModality::Image,
            Refinement::SoundEffects | Refinement::Music | Refinement::Speech => {
                BaseModality::Audio
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Refinement::Pose => "pose",
            Refinement::Segmentation => "segmentation",
            Refinement::Depth => "depth",
            Refinement::Normal => "normal",
            Refinement::Edge => "edge",
            Refinement::SoundEffects => "sound_effects",
            Refinement::Music => "music",
            Refinement::Speech => "speech",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Refinement::Pose => "Pose",
            Refinement::Segmentation => "Segmentation",
            Refinement::Depth => "Depth",
            Refinement::Normal => "Normal",
            Refinement::Edge => "Edge",
            Refinement::SoundEffects => "Sound Effects",
            Refinement::Music => "Music",
            Refinement::Speech => "Speech",
        }
    }
}

impl FromStr for Refinement {
    type Err = ModalityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Refinement::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModalityError::UnknownRefinement(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModalityError {
    #[error("unknown modality `{0}`")]
    UnknownBase(String),
    #[error("unknown refinement `{0}`")]
    UnknownRefinement(String),
    #[error("refinement `{refinement}` cannot narrow `{base}`")]
    RefinementMismatch { base: BaseModality, refinement: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Modality {
    base: BaseModality,
    refinement: Option<Refinement>,
}

impl Modality {
    pub const TEXT: Modality = Modality::plain(BaseModality::Text);
    pub const IMAGE: Modality = Modality::plain(BaseModality::Image);
    pub const VIDEO: Modality = Modality::plain(BaseModality::Video);
    pub const THREE_D: Modality = Modality::plain(BaseModality::ThreeD);
    pub const AUDIO: Modality = Modality::plain(BaseModality::Audio);
    pub const SKETCH: Modality = Modality::plain(BaseModality::Sketch);

    pub const fn plain(base: BaseModality) -> Self {
        Modality { base, refinement: None }
    }

    /// A refined modality; the base is implied by the refinement.
    pub const fn refined(refinement: Refinement) -> Self {
        let base = match refinement {
            Refinement::Pose
            | Refinement::Segmentation
            | Refinement::Depth
            | Refinement::Normal
            | Refinement::Edge => BaseModality::Image,
            Refinement::SoundEffects | Refinement::Music | Refinement::Speech => {
                BaseModality::Audio
            }
        };
        Modality { base, refinement: Some(refinement) }
    }

    pub fn new(base: BaseModality, refinement: Option<Refinement>) -> Result<Self, ModalityError> {
        match refinement {
            Some(r) if r.base() != base => Err(ModalityError::RefinementMismatch {
                base,
                refinement: r.as_str(),
            }),
            _ => Ok(Modality { base, refinement }),
        }
    }

    pub fn base(&self) -> BaseModality {
        self.base
    }

    pub fn refinement(&self) -> Option<Refinement> {
        self.refinement
    }

    /// Human label in the catalog's style, e.g. `Image (Depth)`.
    pub fn label(&self) -> String {
        match self.refinement {
            Some(r) => format!("{} ({})", self.base.label(), r.label()),
            None => self.base.label().to_string(),
        }
    }

    /// Every well-formed modality: six plain bases plus eight refinements.
    pub fn all() -> Vec<Modality> {
        BaseModality::ALL
            .into_iter()
            .map(Modality::plain)
            .chain(Refinement::ALL.into_iter().map(Modality::refined))
            .collect()
    }
}

impl From<BaseModality> for Modality {
    fn from(base: BaseModality) -> Self {
        Modality::plain(base)
    }
}

/// Whether a value of modality `output` may flow into a socket expecting
/// `input`.
///
/// Bases must match. A refined input accepts only the same refinement; a
/// plain input accepts any refinement of its base.
pub fn compatible(output: Modality, input: Modality) -> bool {
    output.base == input.base
        && match input.refinement {
            None => true,
            Some(wanted) => output.refinement == Some(wanted),
        }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.refinement {
            Some(r) => write!(f, "{}/{}", self.base.as_str(), r.as_str()),
            None => f.write_str(self.base.as_str()),
        }
    }
}

impl FromStr for Modality {
    type Err = ModalityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once('/') {
            Some((base, refinement)) => {
                Modality::new(base.parse()?, Some(refinement.parse()?))
            }
            None => Ok(Modality::plain(s.parse()?)),
        }
    }
}

impl Serialize for Modality {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Modality {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for BaseModality {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for BaseModality {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compatibility_examples() {
        assert!(compatible(Modality::IMAGE, Modality::IMAGE));
        let depth = Modality::refined(Refinement::Depth);
        assert!(compatible(depth, depth));
        assert!(!compatible(Modality::TEXT, Modality::IMAGE));
        assert!(!compatible(Modality::IMAGE, depth));
        assert!(compatible(depth, Modality::IMAGE));
    }

    #[test]
    fn sketch_is_its_own_base() {
        assert!(!compatible(Modality::IMAGE, Modality::SKETCH));
        assert!(!compatible(Modality::SKETCH, Modality::IMAGE));
    }

    #[test]
    fn refinement_must_match_base() {
        assert!(Modality::new(BaseModality::Audio, Some(Refinement::Depth)).is_err());
        assert!(Modality::new(BaseModality::Text, Some(Refinement::Music)).is_err());
        assert_eq!(
            Modality::new(BaseModality::Audio, Some(Refinement::Music)).unwrap(),
            Modality::refined(Refinement::Music)
        );
        assert!("text/music".parse::<Modality>().is_err());
    }

    #[test]
    fn wire_form_round_trips() {
        for m in Modality::all() {
            let s = m.to_string();
            assert_eq!(s.parse::<Modality>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<Modality>(&json).unwrap(), m);
        }
        assert_eq!(Modality::all().len(), 14);
    }

    #[test]
    fn labels() {
        assert_eq!(Modality::refined(Refinement::Depth).label(), "Image (Depth)");
        assert_eq!(Modality::refined(Refinement::SoundEffects).label(), "Audio (Sound Effects)");
        assert_eq!(Modality::THREE_D.label(), "3D");
    }
}
