//! The assembly canvas: piece instances, typed connections and the edit
//! journal.

mod chains;
mod edit;
mod snap;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::piece::ParamMap;

pub use chains::{chains, Chain, ChainError};
pub use edit::{Edit, EditError, EditOutcome, Journal, JournalError, Mosaic, DUPLICATE_OFFSET};
pub use snap::{
    input_arm, output_arm, snap_candidate, SnapCandidate, SnapTarget, PIECE_HEIGHT, PIECE_WIDTH,
    SNAP_RADIUS,
};
pub use validate::{validate, UnknownSpec, Violation, ViolationCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub u64);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for InstanceId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse().map(InstanceId)
    }
}

/// Canvas coordinates in abstract units, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceInstance {
    pub instance_id: InstanceId,
    pub spec_id: String,
    pub position: Position,
    #[serde(default)]
    pub parameter_values: ParamMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Connection {
    pub from_instance: InstanceId,
    pub to_instance: InstanceId,
    pub to_channel: u8,
}

impl Connection {
    pub fn new(from: InstanceId, to: InstanceId, channel: u8) -> Self {
        Connection { from_instance: from, to_instance: to, to_channel: channel }
    }

    fn sort_key(&self) -> (InstanceId, u8, InstanceId) {
        (self.to_instance, self.to_channel, self.from_instance)
    }
}

impl fmt::Display for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}[{}]", self.from_instance, self.to_instance, self.to_channel)
    }
}

/// Graph state of a mosaic: what is saved, compared and executed.
///
/// Connections are kept in canonical order (by consumer, channel, producer)
/// so two graphs with the same content compare equal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct MosaicGraph {
    pieces: BTreeMap<InstanceId, PieceInstance>,
    connections: Vec<Connection>,
    next_instance_id: u64,
}

impl MosaicGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn piece(&self, id: InstanceId) -> Option<&PieceInstance> {
        self.pieces.get(&id)
    }

    pub fn pieces(&self) -> impl Iterator<Item = &PieceInstance> {
        self.pieces.values()
    }

    pub fn instance_ids(&self) -> impl Iterator<Item = InstanceId> + '_ {
        self.pieces.keys().copied()
    }

    pub fn connections(&self) -> &[Connection] {
        &self.connections
    }

    pub fn next_instance_id(&self) -> u64 {
        self.next_instance_id
    }

    /// Connections feeding `id`, ordered by channel.
    pub fn incoming(&self, id: InstanceId) -> impl Iterator<Item = &Connection> {
        self.connections.iter().filter(move |c| c.to_instance == id)
    }

    pub fn outgoing(&self, id: InstanceId) -> impl Iterator<Item = &Connection> {
        self.connections.iter().filter(move |c| c.from_instance == id)
    }

    pub fn input_connection(&self, id: InstanceId, channel: u8) -> Option<&Connection> {
        self.incoming(id).find(|c| c.to_channel == channel)
    }

    /// Whether `to` can be reached from `from` by following connections.
    pub fn reaches(&self, from: InstanceId, to: InstanceId) -> bool {
        let mut stack = vec![from];
        let mut seen = std::collections::BTreeSet::new();
        while let Some(node) = stack.pop() {
            if node == to {
                return true;
            }
            if seen.insert(node) {
                stack.extend(self.outgoing(node).map(|c| c.to_instance));
            }
        }
        false
    }

    /// Lowest y coordinate below every piece, or `None` for an empty canvas.
    pub fn bottom_edge(&self) -> Option<f64> {
        self.pieces
            .values()
            .map(|p| p.position.y + PIECE_HEIGHT)
            .fold(None, |acc: Option<f64>, y| Some(acc.map_or(y, |a| a.max(y))))
    }

    pub(crate) fn allocate_id(&mut self) -> InstanceId {
        let id = InstanceId(self.next_instance_id);
        self.next_instance_id += 1;
        id
    }

    pub(crate) fn set_next_instance_id(&mut self, next: u64) {
        self.next_instance_id = next;
    }

    pub(crate) fn insert_piece(&mut self, piece: PieceInstance) {
        self.next_instance_id = self.next_instance_id.max(piece.instance_id.0 + 1);
        self.pieces.insert(piece.instance_id, piece);
    }

    pub(crate) fn piece_mut(&mut self, id: InstanceId) -> Option<&mut PieceInstance> {
        self.pieces.get_mut(&id)
    }

    /// Removes the piece and every connection touching it.
    pub(crate) fn remove_piece(&mut self, id: InstanceId) -> Option<(PieceInstance, Vec<Connection>)> {
        let piece = self.pieces.remove(&id)?;
        let (removed, kept) = self
            .connections
            .drain(..)
            .partition(|c| c.from_instance == id || c.to_instance == id);
        self.connections = kept;
        Some((piece, removed))
    }

    pub(crate) fn insert_connection(&mut self, connection: Connection) {
        let pos = self
            .connections
            .binary_search_by_key(&connection.sort_key(), Connection::sort_key)
            .unwrap_or_else(|p| p);
        self.connections.insert(pos, connection);
    }

    pub(crate) fn remove_connection(&mut self, connection: &Connection) -> bool {
        let before = self.connections.len();
        self.connections.retain(|c| c != connection);
        self.connections.len() != before
    }
}

/// Wire layout of [`MosaicGraph`].
#[derive(Serialize, Deserialize)]
struct GraphRecord {
    pieces: Vec<PieceInstance>,
    connections: Vec<Connection>,
    #[serde(default)]
    next_instance_id: Option<u64>,
}

impl TryFrom<GraphRecord> for MosaicGraph {
    type Error = String;

    fn try_from(r: GraphRecord) -> Result<Self, Self::Error> {
        let mut graph = MosaicGraph::new();
        for piece in r.pieces {
            if graph.pieces.contains_key(&piece.instance_id) {
                return Err(format!("duplicate instance id {}", piece.instance_id));
            }
            graph.insert_piece(piece);
        }
        for c in r.connections {
            graph.insert_connection(c);
        }
        if let Some(next) = r.next_instance_id {
            if next < graph.next_instance_id {
                return Err(format!("next_instance_id {next} collides with an existing piece"));
            }
            graph.next_instance_id = next;
        }
        Ok(graph)
    }
}

impl From<MosaicGraph> for GraphRecord {
    fn from(g: MosaicGraph) -> Self {
        GraphRecord {
            pieces: g.pieces.into_values().collect(),
            connections: g.connections,
            next_instance_id: Some(g.next_instance_id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn piece(id: u64) -> PieceInstance {
        PieceInstance {
            instance_id: InstanceId(id),
            spec_id: "upload_image".into(),
            position: Position::new(id as f64, 0.0),
            parameter_values: ParamMap::new(),
        }
    }

    #[test]
    fn connection_order_is_canonical() {
        let mut a = MosaicGraph::new();
        let mut b = MosaicGraph::new();
        for g in [&mut a, &mut b] {
            g.insert_piece(piece(0));
            g.insert_piece(piece(1));
            g.insert_piece(piece(2));
        }
        let c1 = Connection::new(InstanceId(0), InstanceId(2), 0);
        let c2 = Connection::new(InstanceId(1), InstanceId(2), 1);
        a.insert_connection(c1);
        a.insert_connection(c2);
        b.insert_connection(c2);
        b.insert_connection(c1);
        assert_eq!(a, b);
    }

    #[test]
    fn remove_piece_drops_its_connections() {
        let mut g = MosaicGraph::new();
        g.insert_piece(piece(0));
        g.insert_piece(piece(1));
        g.insert_connection(Connection::new(InstanceId(0), InstanceId(1), 0));
        let (_, removed) = g.remove_piece(InstanceId(0)).unwrap();
        assert_eq!(removed.len(), 1);
        assert!(g.connections().is_empty());
    }

    #[test]
    fn rejects_duplicate_ids_on_load() {
        let json = r#"{"pieces":[{"instance_id":1,"spec_id":"a","position":{"x":0,"y":0}},
                                 {"instance_id":1,"spec_id":"b","position":{"x":0,"y":0}}],
                       "connections":[]}"#;
        assert!(serde_json::from_str::<MosaicGraph>(json).is_err());
    }

    #[test]
    fn missing_counter_is_derived() {
        let json = r#"{"pieces":[{"instance_id":7,"spec_id":"a","position":{"x":0,"y":0}}],"connections":[]}"#;
        let g: MosaicGraph = serde_json::from_str(json).unwrap();
        assert_eq!(g.next_instance_id(), 8);
    }
}
