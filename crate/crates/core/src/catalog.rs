//! The registry of piece specifications and its exportable JSON form.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::modality::{BaseModality, Modality};
use crate::piece::{slugify, PieceKind, PieceSpec};
use crate::search::{self, LexicalScorer, RelevanceScorer, SearchError, SearchHit};

const BUILTIN_CATALOG: &str = include_str!("../data/catalog.json");

/// Version of the exported catalog document layout.
pub const CATALOG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("duplicate spec id or alias `{0}`")]
    DuplicateId(String),
    #[error("spec id `{id}` is not the slug of its name `{name}`")]
    IdNotSlug { id: String, name: String },
    #[error("catalog has no input piece for {0}")]
    MissingInputPiece(BaseModality),
}

/// Versioned JSON export of the catalog, shared with the mosaic format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogDocument {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    pub specs: Vec<PieceSpec>,
}

fn default_format_version() -> u32 {
    CATALOG_FORMAT_VERSION
}

#[derive(Clone)]
pub struct Catalog {
    version: u32,
    specs: Vec<PieceSpec>,
    by_id: HashMap<String, usize>,
    by_alias: HashMap<String, usize>,
    fingerprint: String,
    scorer: Arc<dyn RelevanceScorer>,
}

impl fmt::Debug for Catalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Catalog")
            .field("version", &self.version)
            .field("specs", &self.specs.len())
            .field("fingerprint", &self.fingerprint)
            .finish()
    }
}

impl Catalog {
    /// The compiled-in catalog: the 39 model and glue pieces plus one input
    /// piece per base modality, searched with the lexical scorer.
    pub fn load_builtin() -> Catalog {
        Catalog::from_json(BUILTIN_CATALOG).expect("built-in catalog is well-formed")
    }

    pub fn from_json(json: &str) -> Result<Catalog, CatalogError> {
        let doc: CatalogDocument = serde_json::from_str(json)?;
        Catalog::from_document(doc)
    }

    pub fn from_document(doc: CatalogDocument) -> Result<Catalog, CatalogError> {
        let mut by_id = HashMap::new();
        let mut by_alias = HashMap::new();
        for (i, spec) in doc.specs.iter().enumerate() {
            if slugify(&spec.display_name) != spec.spec_id {
                return Err(CatalogError::IdNotSlug {
                    id: spec.spec_id.clone(),
                    name: spec.display_name.clone(),
                });
            }
            if by_id.insert(spec.spec_id.clone(), i).is_some() {
                return Err(CatalogError::DuplicateId(spec.spec_id.clone()));
            }
        }
        for (i, spec) in doc.specs.iter().enumerate() {
            for alias in &spec.aliases {
                if by_id.contains_key(alias) || by_alias.insert(alias.clone(), i).is_some() {
                    return Err(CatalogError::DuplicateId(alias.clone()));
                }
            }
        }
        for base in BaseModality::ALL {
            let has_input = doc
                .specs
                .iter()
                .any(|s| s.kind == PieceKind::Input && s.output_modality() == Modality::plain(base));
            if !has_input {
                return Err(CatalogError::MissingInputPiece(base));
            }
        }
        let fingerprint = fingerprint_of(&doc.specs);
        Ok(Catalog {
            version: doc.version,
            specs: doc.specs,
            by_id,
            by_alias,
            fingerprint,
            scorer: Arc::new(LexicalScorer),
        })
    }

    /// Replaces the relevance scorer used by [`Catalog::search`].
    pub fn with_scorer(mut self, scorer: Arc<dyn RelevanceScorer>) -> Catalog {
        self.scorer = scorer;
        self
    }

    pub fn scorer(&self) -> &dyn RelevanceScorer {
        self.scorer.as_ref()
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// Hex SHA-256 over the canonical JSON of every spec.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn specs(&self) -> &[PieceSpec] {
        &self.specs
    }

    pub fn get(&self, spec_id: &str) -> Option<&PieceSpec> {
        self.by_id.get(spec_id).map(|&i| &self.specs[i])
    }

    /// Looks up a spec by id or alias.
    pub fn resolve(&self, id_or_alias: &str) -> Option<&PieceSpec> {
        self.get(id_or_alias)
            .or_else(|| self.by_alias.get(id_or_alias).map(|&i| &self.specs[i]))
    }

    pub fn contains(&self, spec_id: &str) -> bool {
        self.by_id.contains_key(spec_id)
    }

    /// The model and glue pieces, in table order (everything except input
    /// pieces).
    pub fn model_table(&self) -> impl Iterator<Item = &PieceSpec> {
        self.specs.iter().filter(|s| s.kind != PieceKind::Input)
    }

    pub fn input_specs(&self) -> impl Iterator<Item = &PieceSpec> {
        self.specs.iter().filter(|s| s.kind == PieceKind::Input)
    }

    /// The input piece producing plain values of `base`.
    pub fn input_spec_for(&self, base: BaseModality) -> &PieceSpec {
        self.input_specs()
            .find(|s| s.output_modality() == Modality::plain(base))
            .expect("every base has an input piece")
    }

    /// Spec ids grouped under the base modality of each input socket; input
    /// pieces are listed under the base they produce.
    pub fn group_by_input_modality(&self) -> BTreeMap<BaseModality, Vec<String>> {
        let mut groups: BTreeMap<BaseModality, Vec<String>> = BTreeMap::new();
        for spec in &self.specs {
            let mut bases: Vec<BaseModality> = if spec.kind == PieceKind::Input {
                vec![spec.output_modality().base()]
            } else {
                spec.input_modalities().map(|m| m.base()).collect()
            };
            bases.dedup();
            for base in bases {
                groups.entry(base).or_default().push(spec.spec_id.clone());
            }
        }
        groups
    }

    pub fn search(&self, query: &str, k: usize) -> Result<Vec<SearchHit>, SearchError> {
        search::search(self, query, k)
    }

    pub fn export(&self) -> CatalogDocument {
        CatalogDocument {
            format_version: CATALOG_FORMAT_VERSION,
            version: self.version,
            fingerprint: Some(self.fingerprint.clone()),
            specs: self.specs.clone(),
        }
    }
}

fn fingerprint_of(specs: &[PieceSpec]) -> String {
    let canonical = serde_json::to_vec(specs).expect("specs serialize");
    hex::encode(Sha256::digest(&canonical))
}

/// Text a scorer sees for one spec: display name plus description.
pub fn search_document(spec: &PieceSpec) -> String {
    format!("{} {}", spec.display_name, spec.description)
}
