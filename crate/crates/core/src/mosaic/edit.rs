//! Reversible edit commands and the undo/redo journal.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Connection, InstanceId, MosaicGraph, PieceInstance, Position};
use crate::catalog::Catalog;
use crate::modality::{compatible, Modality};
use crate::piece::{ParamError, ParamValue};

/// Offset applied to a duplicated piece so it does not cover the original.
pub const DUPLICATE_OFFSET: Position = Position::new(1.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    AddPiece { spec_id: String, position: Position },
    RemovePiece { instance: InstanceId },
    MovePieces { instances: Vec<InstanceId>, dx: f64, dy: f64 },
    DuplicatePiece { instance: InstanceId },
    Connect { from: InstanceId, to: InstanceId, channel: u8 },
    Disconnect { to: InstanceId, channel: u8 },
    SetParameter { instance: InstanceId, name: String, value: ParamValue },
}

impl Edit {
    pub fn add(spec_id: &str, x: f64, y: f64) -> Edit {
        Edit::AddPiece { spec_id: spec_id.to_string(), position: Position::new(x, y) }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EditError {
    #[error("{from} output cannot feed {to} input")]
    IncompatibleConnection { from: String, to: String },
    #[error("connecting {from} -> {to} would form a cycle")]
    CycleWouldForm { from: InstanceId, to: InstanceId },
    #[error("input channel {channel} of piece {instance} is already connected")]
    OccupiedInputChannel { instance: InstanceId, channel: u8 },
    #[error("piece {instance} has no input channel {channel}")]
    InvalidChannel { instance: InstanceId, channel: u8 },
    #[error("no input connected to channel {channel} of piece {instance}")]
    NotConnected { instance: InstanceId, channel: u8 },
    #[error("unknown piece {0}")]
    UnknownInstance(InstanceId),
    #[error("unknown spec `{0}`")]
    UnknownSpec(String),
    #[error(transparent)]
    InvalidParameter(#[from] ParamError),
}

impl EditError {
    /// Stable machine-readable name, matching the violation codes where the
    /// two overlap.
    pub fn code(&self) -> &'static str {
        match self {
            EditError::IncompatibleConnection { .. } => "IncompatibleConnection",
            EditError::CycleWouldForm { .. } => "CycleWouldForm",
            EditError::OccupiedInputChannel { .. } => "OccupiedInputChannel",
            EditError::InvalidChannel { .. } => "InvalidChannel",
            EditError::NotConnected { .. } => "NotConnected",
            EditError::UnknownInstance(_) => "UnknownInstance",
            EditError::UnknownSpec(_) => "UnknownSpec",
            EditError::InvalidParameter(ParamError::UnknownParameter(_)) => "UnknownParameter",
            EditError::InvalidParameter(ParamError::TypeMismatch { .. }) => "InvalidParameterType",
            EditError::InvalidParameter(_) => "ParameterOutOfBounds",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum JournalError {
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("nothing to redo")]
    NothingToRedo,
}

/// What an applied edit changed; enough to revert it exactly.
#[derive(Debug, Clone, PartialEq)]
enum Applied {
    Created { id: InstanceId, previous_next_id: u64 },
    Removed { piece: PieceInstance, connections: Vec<Connection> },
    Moved { previous: Vec<(InstanceId, Position)> },
    Connected(Connection),
    Disconnected(Connection),
    ParameterSet { instance: InstanceId, name: String, previous: Option<ParamValue> },
}

/// Result of a successful edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOutcome {
    Created(InstanceId),
    Changed,
}

impl EditOutcome {
    pub fn created(self) -> Option<InstanceId> {
        match self {
            EditOutcome::Created(id) => Some(id),
            EditOutcome::Changed => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Journal {
    entries: Vec<(Edit, Applied)>,
    cursor: usize,
}

impl Journal {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Edits currently in effect, oldest first.
    pub fn applied_edits(&self) -> impl Iterator<Item = &Edit> {
        self.entries[..self.cursor].iter().map(|(e, _)| e)
    }
}

/// A mosaic being edited: its graph plus the journal of edits that built it.
#[derive(Debug, Clone, Default)]
pub struct Mosaic {
    graph: MosaicGraph,
    journal: Journal,
}

impl Mosaic {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts editing a loaded graph with an empty journal.
    pub fn from_graph(graph: MosaicGraph) -> Self {
        Mosaic { graph, journal: Journal::default() }
    }

    pub fn graph(&self) -> &MosaicGraph {
        &self.graph
    }

    pub fn into_graph(self) -> MosaicGraph {
        self.graph
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    /// Applies `edit`, refusing any change that would make the mosaic
    /// invalid. On success the edit is journaled and the redo tail dropped.
    pub fn apply_edit(&mut self, catalog: &Catalog, edit: Edit) -> Result<EditOutcome, EditError> {
        let applied = apply(&mut self.graph, catalog, &edit)?;
        let outcome = match applied {
            Applied::Created { id, .. } => EditOutcome::Created(id),
            _ => EditOutcome::Changed,
        };
        self.journal.entries.truncate(self.journal.cursor);
        self.journal.entries.push((edit, applied));
        self.journal.cursor += 1;
        Ok(outcome)
    }

    /// Applies edits in order, stopping at the first failure. Already
    /// applied edits stay applied.
    pub fn apply_all(
        &mut self,
        catalog: &Catalog,
        edits: impl IntoIterator<Item = Edit>,
    ) -> Result<Vec<EditOutcome>, EditError> {
        edits.into_iter().map(|e| self.apply_edit(catalog, e)).collect()
    }

    pub fn undo(&mut self) -> Result<&Edit, JournalError> {
        if self.journal.cursor == 0 {
            return Err(JournalError::NothingToUndo);
        }
        self.journal.cursor -= 1;
        let (edit, applied) = &self.journal.entries[self.journal.cursor];
        revert(&mut self.graph, applied);
        Ok(edit)
    }

    pub fn redo(&mut self, catalog: &Catalog) -> Result<&Edit, JournalError> {
        if self.journal.cursor == self.journal.entries.len() {
            return Err(JournalError::NothingToRedo);
        }
        let index = self.journal.cursor;
        let applied = apply(&mut self.graph, catalog, &self.journal.entries[index].0)
            .expect("redo replays an edit on the state it was first applied to");
        self.journal.entries[index].1 = applied;
        self.journal.cursor += 1;
        Ok(&self.journal.entries[index].0)
    }

    /// Rebuilds a mosaic from scratch by applying `edits` in order.
    pub fn replay<'a>(
        catalog: &Catalog,
        edits: impl IntoIterator<Item = &'a Edit>,
    ) -> Result<Mosaic, EditError> {
        let mut mosaic = Mosaic::new();
        for edit in edits {
            mosaic.apply_edit(catalog, edit.clone())?;
        }
        Ok(mosaic)
    }
}

fn require(graph: &MosaicGraph, id: InstanceId) -> Result<&PieceInstance, EditError> {
    graph.piece(id).ok_or(EditError::UnknownInstance(id))
}

fn output_modality(graph: &MosaicGraph, catalog: &Catalog, id: InstanceId) -> Result<Modality, EditError> {
    let piece = require(graph, id)?;
    catalog
        .get(&piece.spec_id)
        .map(|s| s.output_modality())
        .ok_or_else(|| EditError::UnknownSpec(piece.spec_id.clone()))
}

fn apply(graph: &mut MosaicGraph, catalog: &Catalog, edit: &Edit) -> Result<Applied, EditError> {
    match edit {
        Edit::AddPiece { spec_id, position } => {
            let spec = catalog.get(spec_id).ok_or_else(|| EditError::UnknownSpec(spec_id.clone()))?;
            let previous_next_id = graph.next_instance_id();
            let id = graph.allocate_id();
            graph.insert_piece(PieceInstance {
                instance_id: id,
                spec_id: spec_id.clone(),
                position: *position,
                parameter_values: spec.default_parameters(),
            });
            Ok(Applied::Created { id, previous_next_id })
        }
        Edit::RemovePiece { instance } => {
            let (piece, connections) =
                graph.remove_piece(*instance).ok_or(EditError::UnknownInstance(*instance))?;
            Ok(Applied::Removed { piece, connections })
        }
        Edit::MovePieces { instances, dx, dy } => {
            let unique: BTreeSet<InstanceId> = instances.iter().copied().collect();
            for &id in &unique {
                require(graph, id)?;
            }
            let mut previous = Vec::with_capacity(unique.len());
            for id in unique {
                let piece = graph.piece_mut(id).expect("checked above");
                previous.push((id, piece.position));
                piece.position = Position::new(piece.position.x + dx, piece.position.y + dy);
            }
            Ok(Applied::Moved { previous })
        }
        Edit::DuplicatePiece { instance } => {
            let original = require(graph, *instance)?.clone();
            let previous_next_id = graph.next_instance_id();
            let id = graph.allocate_id();
            graph.insert_piece(PieceInstance {
                instance_id: id,
                position: Position::new(
                    original.position.x + DUPLICATE_OFFSET.x,
                    original.position.y + DUPLICATE_OFFSET.y,
                ),
                ..original
            });
            Ok(Applied::Created { id, previous_next_id })
        }
        Edit::Connect { from, to, channel } => {
            let from_modality = output_modality(graph, catalog, *from)?;
            let target = require(graph, *to)?;
            let spec = catalog
                .get(&target.spec_id)
                .ok_or_else(|| EditError::UnknownSpec(target.spec_id.clone()))?;
            let socket = spec
                .input_sockets
                .get(usize::from(*channel))
                .ok_or(EditError::InvalidChannel { instance: *to, channel: *channel })?;
            if !compatible(from_modality, socket.modality) {
                return Err(EditError::IncompatibleConnection {
                    from: from_modality.label(),
                    to: socket.modality.label(),
                });
            }
            if graph.input_connection(*to, *channel).is_some() {
                return Err(EditError::OccupiedInputChannel { instance: *to, channel: *channel });
            }
            if from == to || graph.reaches(*to, *from) {
                return Err(EditError::CycleWouldForm { from: *from, to: *to });
            }
            let connection = Connection::new(*from, *to, *channel);
            graph.insert_connection(connection);
            Ok(Applied::Connected(connection))
        }
        Edit::Disconnect { to, channel } => {
            require(graph, *to)?;
            let connection = *graph
                .input_connection(*to, *channel)
                .ok_or(EditError::NotConnected { instance: *to, channel: *channel })?;
            graph.remove_connection(&connection);
            Ok(Applied::Disconnected(connection))
        }
        Edit::SetParameter { instance, name, value } => {
            let piece = require(graph, *instance)?;
            let spec = catalog
                .get(&piece.spec_id)
                .ok_or_else(|| EditError::UnknownSpec(piece.spec_id.clone()))?;
            let value = spec.check_parameter(name, value)?;
            let piece = graph.piece_mut(*instance).expect("checked above");
            let previous = piece.parameter_values.insert(name.clone(), value);
            Ok(Applied::ParameterSet { instance: *instance, name: name.clone(), previous })
        }
    }
}

fn revert(graph: &mut MosaicGraph, applied: &Applied) {
    match applied {
        Applied::Created { id, previous_next_id } => {
            graph.remove_piece(*id);
            graph.set_next_instance_id(*previous_next_id);
        }
        Applied::Removed { piece, connections } => {
            let next = graph.next_instance_id();
            graph.insert_piece(piece.clone());
            graph.set_next_instance_id(next);
            for c in connections {
                graph.insert_connection(*c);
            }
        }
        Applied::Moved { previous } => {
            for (id, position) in previous {
                if let Some(piece) = graph.piece_mut(*id) {
                    piece.position = *position;
                }
            }
        }
        Applied::Connected(c) => {
            graph.remove_connection(c);
        }
        Applied::Disconnected(c) => graph.insert_connection(*c),
        Applied::ParameterSet { instance, name, previous } => {
            if let Some(piece) = graph.piece_mut(*instance) {
                match previous {
                    Some(v) => {
                        piece.parameter_values.insert(name.clone(), v.clone());
                    }
                    None => {
                        piece.parameter_values.remove(name);
                    }
                }
            }
        }
    }
}
