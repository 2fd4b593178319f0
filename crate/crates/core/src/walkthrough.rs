//! The interior-design mosaic: three chains assembled edit by edit, the way
//! a designer would on the canvas.
//!
//! - chain 0 ideates a concept from the client's photo,
//! - chain 1 turns the photo into a 2D redesign and a 3D mockup,
//! - chain 2 picks background music for the presentation.

use std::collections::BTreeMap;

use crate::blob::BlobError;
use crate::catalog::Catalog;
use crate::engine::{mock, Engine};
use crate::media::{FormatTag, MediaValue};
use crate::modality::Modality;
use crate::mosaic::{Edit, EditError, InstanceId, Mosaic, DUPLICATE_OFFSET};
use crate::piece::ParamValue;

pub const IDEATION_TASK: &str = "contemporary interior concept";
pub const CONCEPT: &str = "An airy space with a minimalist fireplace and ladder, illuminated by low-hanging lamps.";
pub const STAIRCASE_INSTRUCTION: &str = "replace the wooden ladder with a glass spiral staircase";
pub const MUSIC_TASK: &str = "music for the image";

/// Instance ids of the pieces the tests and the CLI need to address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteriorDesign {
    pub ideation_photo: InstanceId,
    pub ideation: InstanceId,
    pub design_photo: InstanceId,
    pub concept_text: InstanceId,
    pub instruction_text: InstanceId,
    pub mockup_3d: InstanceId,
    pub presentation_photo: InstanceId,
    pub music: InstanceId,
}

struct Builder<'a> {
    catalog: &'a Catalog,
    mosaic: Mosaic,
}

impl Builder<'_> {
    fn add(&mut self, spec_id: &str, x: f64, y: f64) -> Result<InstanceId, EditError> {
        let outcome = self.mosaic.apply_edit(self.catalog, Edit::add(spec_id, x, y))?;
        Ok(outcome.created().expect("add creates a piece"))
    }

    fn connect(&mut self, from: InstanceId, to: InstanceId, channel: u8) -> Result<(), EditError> {
        self.mosaic.apply_edit(self.catalog, Edit::Connect { from, to, channel })?;
        Ok(())
    }

    fn set(&mut self, instance: InstanceId, name: &str, value: ParamValue) -> Result<(), EditError> {
        self.mosaic.apply_edit(self.catalog, Edit::SetParameter { instance, name: name.to_string(), value })?;
        Ok(())
    }

    fn remove(&mut self, instance: InstanceId) -> Result<(), EditError> {
        self.mosaic.apply_edit(self.catalog, Edit::RemovePiece { instance })?;
        Ok(())
    }
}

/// Builds the mosaic through `apply_edit` only, including the detour through
/// edge-map pieces that end up in the trash.
pub fn build(catalog: &Catalog) -> Result<(Mosaic, InteriorDesign), EditError> {
    let mut b = Builder { catalog, mosaic: Mosaic::new() };

    // Ideation from the client's photo.
    let photo = b.add("upload_image", 0.0, 0.0)?;
    let tags = b.add("tag_image", 6.0, 0.0)?;
    b.connect(photo, tags, 0)?;
    let ideation = b.add("ask_gpt", 12.0, 0.0)?;
    b.connect(tags, ideation, 0)?;
    b.set(ideation, "mode", ParamValue::Text("ideation".into()))?;
    b.set(ideation, "task", ParamValue::Text(IDEATION_TASK.into()))?;

    // Visual design: duplicate the photo to start a second chain.
    let design_photo = b
        .mosaic
        .apply_edit(catalog, Edit::DuplicatePiece { instance: photo })?
        .created()
        .expect("duplicate creates a piece");
    b.mosaic.apply_edit(
        catalog,
        Edit::MovePieces { instances: vec![design_photo], dx: -DUPLICATE_OFFSET.x, dy: 4.0 - DUPLICATE_OFFSET.y },
    )?;
    let y = 4.0;
    let no_people = b.add("remove_people", 6.0, y)?;
    b.connect(design_photo, no_people, 0)?;
    let concept = b.add("type_text", 6.0, y + 2.0)?;

    let edges = b.add("get_edge_map", 12.0, y)?;
    b.connect(no_people, edges, 0)?;
    let edge_render = b.add("generate_image_from_text_and_edge_map", 18.0, y)?;
    b.connect(edges, edge_render, 0)?;
    b.connect(concept, edge_render, 1)?;
    // The edge map loses the room's structure; both pieces go to the trash.
    b.remove(edge_render)?;
    b.remove(edges)?;

    let depth = b.add("get_depth_map", 12.0, y)?;
    b.connect(no_people, depth, 0)?;
    let depth_render = b.add("generate_image_from_text_and_depth_map", 18.0, y)?;
    b.connect(depth, depth_render, 0)?;
    b.connect(concept, depth_render, 1)?;
    b.set(depth_render, "seed", ParamValue::Integer(7))?;

    let instruction = b.add("type_text", 18.0, y + 2.0)?;
    let edit = b.add("generate_image_from_text_and_driving_image", 24.0, y)?;
    b.connect(depth_render, edit, 0)?;
    b.connect(instruction, edit, 1)?;

    let mockup = b.add("generate_3d_model_from_image", 30.0, y)?;
    b.connect(edit, mockup, 0)?;
    // Low-resolution mockup: insert an upscaler in front of it.
    b.mosaic.apply_edit(catalog, Edit::Disconnect { to: mockup, channel: 0 })?;
    let upscale = b.add("increase_image_resolution", 30.0, y)?;
    b.mosaic.apply_edit(catalog, Edit::MovePieces { instances: vec![mockup], dx: 6.0, dy: 0.0 })?;
    b.connect(edit, upscale, 0)?;
    b.connect(upscale, mockup, 0)?;

    // Presentation music.
    let y = 10.0;
    let presentation_photo = b.add("upload_image", 0.0, y)?;
    let caption = b.add("describe_image", 6.0, y)?;
    b.connect(presentation_photo, caption, 0)?;
    let brainstorm = b.add("ask_gpt", 12.0, y)?;
    b.connect(caption, brainstorm, 0)?;
    b.set(brainstorm, "mode", ParamValue::Text("ideation".into()))?;
    b.set(brainstorm, "task", ParamValue::Text(MUSIC_TASK.into()))?;
    let music = b.add("generate_music", 18.0, y)?;
    b.connect(brainstorm, music, 0)?;

    let ids = InteriorDesign {
        ideation_photo: photo,
        ideation,
        design_photo,
        concept_text: concept,
        instruction_text: instruction,
        mockup_3d: mockup,
        presentation_photo,
        music,
    };
    Ok((b.mosaic, ids))
}

/// A stand-in for the client's photograph.
pub fn client_photo() -> Vec<u8> {
    mock::png("client photo: living room with a wooden ladder").expect("png encodes")
}

impl InteriorDesign {
    /// User inputs for each of the three chains, in chain order. The photo
    /// is uploaded into the engine's blob store.
    pub fn user_inputs(&self, engine: &Engine) -> Result<[BTreeMap<InstanceId, MediaValue>; 3], BlobError> {
        let photo = engine.upload(Modality::IMAGE, &client_photo(), FormatTag::Png)?;
        Ok([
            BTreeMap::from([(self.ideation_photo, photo.clone())]),
            BTreeMap::from([
                (self.design_photo, photo.clone()),
                (self.concept_text, MediaValue::user_text(CONCEPT)),
                (self.instruction_text, MediaValue::user_text(STAIRCASE_INSTRUCTION)),
            ]),
            BTreeMap::from([(self.presentation_photo, photo)]),
        ])
    }
}
