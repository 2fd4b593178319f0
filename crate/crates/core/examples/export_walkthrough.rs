//! Prints the interior-design mosaic as a workspace document.
//!
//! cargo run -p mosaic-core --example export_walkthrough > fixtures/interior_design.mosaic.json

use mosaic_core::store::MosaicDocument;
use mosaic_core::{walkthrough, Catalog};

fn main() {
    let catalog = Catalog::load_builtin();
    let (mosaic, _) = walkthrough::build(&catalog).expect("walkthrough edits apply");
    let doc = MosaicDocument::new("interior_design", "Interior design", &catalog, mosaic.into_graph());
    println!("{}", serde_json::to_string_pretty(&doc).expect("document serializes"));
}
