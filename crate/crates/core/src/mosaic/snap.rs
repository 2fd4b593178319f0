//! Canvas geometry and snap-target search for a piece being dragged.
//!
//! A piece occupies `PIECE_WIDTH x PIECE_HEIGHT` from its top-left position.
//! The output arm sits at the middle of the right edge; input arms are spread
//! evenly down the left edge.

use serde::{Deserialize, Serialize};

use super::{InstanceId, MosaicGraph, Position};
use crate::catalog::Catalog;
use crate::modality::compatible;
use crate::piece::PieceSpec;

pub const PIECE_WIDTH: f64 = 4.0;
pub const PIECE_HEIGHT: f64 = 1.0;
pub const SNAP_RADIUS: f64 = 1.5 * PIECE_HEIGHT;

pub fn output_arm(position: Position) -> Position {
    Position::new(position.x + PIECE_WIDTH, position.y + PIECE_HEIGHT / 2.0)
}

pub fn input_arm(position: Position, channel: u8, arity: usize) -> Position {
    let slot = f64::from(channel) + 1.0;
    Position::new(position.x, position.y + PIECE_HEIGHT * slot / (arity as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "side", rename_all = "snake_case")]
pub enum SnapTarget {
    /// The dragged piece would consume `producer`'s output on its own
    /// input channel `into_channel`.
    Upstream { producer: InstanceId, into_channel: u8 },
    /// The dragged piece would feed `consumer` on its open input `channel`.
    Downstream { consumer: InstanceId, channel: u8 },
}

impl SnapTarget {
    pub fn instance(&self) -> InstanceId {
        match *self {
            SnapTarget::Upstream { producer, .. } => producer,
            SnapTarget::Downstream { consumer, .. } => consumer,
        }
    }

    pub fn channel(&self) -> u8 {
        match *self {
            SnapTarget::Upstream { into_channel, .. } => into_channel,
            SnapTarget::Downstream { channel, .. } => channel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapCandidate {
    pub target: SnapTarget,
    pub distance: f64,
}

/// The nearest open, compatible socket within [`SNAP_RADIUS`] of a `dragged`
/// piece placed at `position`. Incompatible sockets are never offered. Ties
/// go to the lowest instance id, then the lowest channel.
pub fn snap_candidate(
    graph: &MosaicGraph,
    catalog: &Catalog,
    dragged: &PieceSpec,
    position: Position,
) -> Option<SnapCandidate> {
    let dragged_out = output_arm(position);
    let mut best: Option<(f64, InstanceId, u8, SnapTarget)> = None;
    let mut consider = |distance: f64, target: SnapTarget| {
        if distance > SNAP_RADIUS {
            return;
        }
        let key = (distance, target.instance(), target.channel());
        let better = match &best {
            None => true,
            Some((d, id, ch, _)) => key.0.total_cmp(d).then(key.1.cmp(id)).then(key.2.cmp(ch)).is_lt(),
        };
        if better {
            best = Some((key.0, key.1, key.2, target));
        }
    };

    for piece in graph.pieces() {
        let Some(spec) = catalog.get(&piece.spec_id) else { continue };

        // Target output -> dragged input.
        let target_out = output_arm(piece.position);
        for socket in &dragged.input_sockets {
            if compatible(spec.output_modality(), socket.modality) {
                let arm = input_arm(position, socket.channel_index, dragged.arity());
                consider(
                    target_out.distance(arm),
                    SnapTarget::Upstream { producer: piece.instance_id, into_channel: socket.channel_index },
                );
            }
        }

        // Dragged output -> open target input.
        for socket in &spec.input_sockets {
            let open = graph.input_connection(piece.instance_id, socket.channel_index).is_none();
            if open && compatible(dragged.output_modality(), socket.modality) {
                let arm = input_arm(piece.position, socket.channel_index, spec.arity());
                consider(
                    dragged_out.distance(arm),
                    SnapTarget::Downstream { consumer: piece.instance_id, channel: socket.channel_index },
                );
            }
        }
    }
    best.map(|(distance, _, _, target)| SnapCandidate { target, distance })
}
