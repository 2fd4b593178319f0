//! Building blocks for composing multimodal foundation-model pipelines out of
//! typed puzzle pieces: the modality type system, the built-in piece catalog,
//! the editable mosaic graph, LLM glue prompts, the chain executor and the
//! assembly assistant that plans chains from a task description.

pub mod assistant;
pub mod blob;
pub mod catalog;
pub mod engine;
pub mod glue;
pub mod llm;
pub mod media;
pub mod modality;
pub mod mosaic;
pub mod piece;
pub mod search;
pub mod store;
pub mod studio;
pub mod walkthrough;
pub mod wire;

pub use catalog::Catalog;
pub use media::{ContentHash, FormatTag, MediaValue, Payload};
pub use modality::{BaseModality, Modality, Refinement};
pub use mosaic::{Connection, InstanceId, Mosaic, MosaicGraph, PieceInstance};
pub use piece::{ParamValue, ParameterSchema, PieceKind, PieceSpec};
