#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use mosaic_core::engine::{mock, Engine};
use mosaic_core::modality::compatible;
use mosaic_core::mosaic::Edit;
use mosaic_core::piece::ParamKind;
use mosaic_core::{BaseModality, Catalog, FormatTag, InstanceId, MediaValue, Modality, Mosaic, ParamValue, ParameterSchema};
use proptest::prelude::*;

pub fn catalog() -> Arc<Catalog> {
    Arc::new(Catalog::load_builtin())
}

/// An edit described by indices, resolved against whatever the mosaic holds
/// when it is applied.
#[derive(Debug, Clone)]
pub enum Op {
    Add { spec: usize, x: i16, y: i16 },
    Connect { from: usize, to: usize, channel: u8 },
    Param { piece: usize, param: usize, pick: u8 },
    Move { piece: usize, dx: i8, dy: i8 },
    Duplicate { piece: usize },
    Remove { piece: usize },
    Disconnect { piece: usize, channel: u8 },
}

pub fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (any::<usize>(), any::<i16>(), any::<i16>()).prop_map(|(spec, x, y)| Op::Add { spec, x, y }),
        6 => (any::<usize>(), any::<usize>(), 0u8..2).prop_map(|(from, to, channel)| Op::Connect { from, to, channel }),
        3 => (any::<usize>(), any::<usize>(), any::<u8>()).prop_map(|(piece, param, pick)| Op::Param { piece, param, pick }),
        1 => (any::<usize>(), any::<i8>(), any::<i8>()).prop_map(|(piece, dx, dy)| Op::Move { piece, dx, dy }),
        1 => any::<usize>().prop_map(|piece| Op::Duplicate { piece }),
        1 => any::<usize>().prop_map(|piece| Op::Remove { piece }),
        1 => (any::<usize>(), 0u8..2).prop_map(|(piece, channel)| Op::Disconnect { piece, channel }),
    ]
}

/// A value inside the schema's bounds, chosen by `pick`.
pub fn param_value(schema: &ParameterSchema, pick: u8) -> ParamValue {
    match &schema.kind {
        ParamKind::Integer { min, max } => match pick % 4 {
            0 => schema.default.clone(),
            1 => ParamValue::Integer(*min),
            2 => ParamValue::Integer(*max),
            _ => ParamValue::Integer(min + (max - min) / 3),
        },
        ParamKind::Real { min, max } => match pick % 4 {
            0 => schema.default.clone(),
            1 => ParamValue::Real(*min),
            2 => ParamValue::Real(*max),
            _ => ParamValue::Real(min + (max - min) * 0.37),
        },
        ParamKind::Enum { variants } => ParamValue::Text(variants[pick as usize % variants.len()].clone()),
        ParamKind::Boolean => ParamValue::Boolean(pick.is_multiple_of(2)),
        ParamKind::Text => ParamValue::Text(format!("text value {pick}")),
    }
}

pub fn edit_for(catalog: &Catalog, mosaic: &Mosaic, op: &Op) -> Option<Edit> {
    let ids: Vec<InstanceId> = mosaic.graph().instance_ids().collect();
    let pick = |i: usize| (!ids.is_empty()).then(|| ids[i % ids.len()]);
    Some(match *op {
        Op::Add { spec, x, y } => {
            let specs = catalog.specs();
            Edit::add(&specs[spec % specs.len()].spec_id, f64::from(x) / 4.0, f64::from(y) / 4.0)
        }
        Op::Connect { from, to, channel } => Edit::Connect { from: pick(from)?, to: pick(to)?, channel },
        Op::Param { piece, param, pick: p } => {
            let instance = pick(piece)?;
            let spec = catalog.get(&mosaic.graph().piece(instance)?.spec_id)?;
            if spec.parameter_schema.is_empty() {
                return None;
            }
            let schema = &spec.parameter_schema[param % spec.parameter_schema.len()];
            Edit::SetParameter { instance, name: schema.name.clone(), value: param_value(schema, p) }
        }
        Op::Move { piece, dx, dy } => {
            Edit::MovePieces { instances: vec![pick(piece)?], dx: f64::from(dx) / 2.0, dy: f64::from(dy) / 2.0 }
        }
        Op::Duplicate { piece } => Edit::DuplicatePiece { instance: pick(piece)? },
        Op::Remove { piece } => Edit::RemovePiece { instance: pick(piece)? },
        Op::Disconnect { piece, channel } => Edit::Disconnect { to: pick(piece)?, channel },
    })
}

/// Applies every op that resolves, skipping the ones the mosaic refuses, so
/// the result is always valid.
pub fn build_random(catalog: &Catalog, ops: &[Op]) -> Mosaic {
    let mut mosaic = Mosaic::new();
    for op in ops {
        if let Some(edit) = edit_for(catalog, &mosaic, op) {
            let _ = mosaic.apply_edit(catalog, edit);
        }
    }
    mosaic
}

pub struct RandomChain {
    pub mosaic: Mosaic,
    pub terminal: InstanceId,
    pub terminal_spec: String,
    pub inputs: Vec<(InstanceId, BaseModality)>,
    pub length: usize,
}

/// A linear chain of up to `choices.len()` pieces, starting from an input
/// piece. Each step picks among every spec with an input channel the
/// previous output can feed; second channels are fed by fresh input pieces,
/// so specs whose other channel is refined are not eligible.
pub fn random_chain(catalog: &Catalog, choices: &[u16]) -> RandomChain {
    let mut mosaic = Mosaic::new();
    let mut inputs = Vec::new();
    let start = BaseModality::ALL[choices[0] as usize % BaseModality::ALL.len()];
    let first = add(catalog, &mut mosaic, &catalog.input_spec_for(start).spec_id);
    inputs.push((first, start));
    let mut current = first;
    let mut current_out = Modality::plain(start);
    let mut terminal_spec = catalog.input_spec_for(start).spec_id.clone();
    let mut length = 1;

    for &choice in &choices[1..] {
        let mut options = Vec::new();
        for spec in catalog.model_table() {
            for (ch, socket) in spec.input_sockets.iter().enumerate() {
                let others_plain = spec
                    .input_sockets
                    .iter()
                    .enumerate()
                    .all(|(o, s)| o == ch || s.modality.refinement().is_none());
                if compatible(current_out, socket.modality) && others_plain {
                    options.push((spec, ch as u8));
                }
            }
        }
        if options.is_empty() {
            break;
        }
        let (spec, channel) = options[choice as usize % options.len()];
        let id = add(catalog, &mut mosaic, &spec.spec_id);
        mosaic.apply_edit(catalog, Edit::Connect { from: current, to: id, channel }).expect("compatible by construction");
        for (o, socket) in spec.input_sockets.iter().enumerate() {
            if o as u8 != channel {
                let base = socket.modality.base();
                let extra = add(catalog, &mut mosaic, &catalog.input_spec_for(base).spec_id);
                mosaic
                    .apply_edit(catalog, Edit::Connect { from: extra, to: id, channel: o as u8 })
                    .expect("plain input accepts its base");
                inputs.push((extra, base));
            }
        }
        current = id;
        current_out = spec.output_modality();
        terminal_spec = spec.spec_id.clone();
        length += 1;
    }
    RandomChain { mosaic, terminal: current, terminal_spec, inputs, length }
}

fn add(catalog: &Catalog, mosaic: &mut Mosaic, spec_id: &str) -> InstanceId {
    let y = mosaic.graph().len() as f64 * 2.0;
    mosaic
        .apply_edit(catalog, Edit::add(spec_id, 0.0, y))
        .expect("known spec")
        .created()
        .expect("created")
}

/// Placeholder user media for an input piece of `base`.
pub fn sample_input(engine: &Engine, id: InstanceId, base: BaseModality) -> MediaValue {
    let stamp = format!("user input {id}");
    let (bytes, format) = match base {
        BaseModality::Text => return MediaValue::user_text(stamp),
        BaseModality::Image | BaseModality::Sketch => (mock::png(&stamp).unwrap(), FormatTag::Png),
        BaseModality::Video => (mock::mp4(&stamp), FormatTag::Mp4),
        BaseModality::ThreeD => (mock::glb(&stamp), FormatTag::Glb),
        BaseModality::Audio => (mock::wav(&stamp), FormatTag::Wav),
    };
    engine.upload(Modality::plain(base), &bytes, format).unwrap()
}

pub fn sample_inputs(engine: &Engine, inputs: &[(InstanceId, BaseModality)]) -> BTreeMap<InstanceId, MediaValue> {
    inputs.iter().map(|&(id, base)| (id, sample_input(engine, id, base))).collect()
}
