use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::{ContentHash, FormatTag, MediaValue};
use crate::modality::Modality;
use crate::mosaic::{Connection, InstanceId};
use crate::piece::ParamMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceStatus {
    Pending,
    Running,
    Done,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPiece {
    pub instance_id: InstanceId,
    pub spec_id: String,
    /// Effective values, defaults included.
    pub parameters: ParamMap,
}

/// The chain as it was when the run started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSnapshot {
    pub chain_index: usize,
    /// Execution order.
    pub pieces: Vec<SnapshotPiece>,
    pub connections: Vec<Connection>,
}

impl ChainSnapshot {
    pub fn order(&self) -> impl Iterator<Item = InstanceId> + '_ {
        self.pieces.iter().map(|p| p.instance_id)
    }

    pub fn reaches(&self, from: InstanceId, to: InstanceId) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(id) = stack.pop() {
            if id == to {
                return true;
            }
            if seen.insert(id) {
                stack.extend(self.connections.iter().filter(|c| c.from_instance == id).map(|c| c.to_instance));
            }
        }
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    AdapterFailure,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceFailure {
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceEntry {
    pub instance_id: InstanceId,
    pub spec_id: String,
    pub status: PieceStatus,
    #[serde(default)]
    pub inputs: Vec<MediaValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<MediaValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
    #[serde(default)]
    pub cache_hit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<PieceFailure>,
}

impl PieceEntry {
    pub(crate) fn pending(instance_id: InstanceId, spec_id: String) -> Self {
        PieceEntry {
            instance_id,
            spec_id,
            status: PieceStatus::Pending,
            inputs: Vec::new(),
            output: None,
            started_at: None,
            finished_at: None,
            wall_time_ms: None,
            cache_hit: false,
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mosaic_id: Option<String>,
    pub chain: ChainSnapshot,
    /// One entry per piece, in execution order.
    pub entries: Vec<PieceEntry>,
    pub status: RunStatus,
    pub started_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InspectError {
    #[error("instance {0} is not part of this run")]
    UnknownInstance(InstanceId),
    #[error("instance {instance} has no output yet (status {status:?})")]
    NotYetComputed { instance: InstanceId, status: PieceStatus },
    #[error("instance {instance} failed: {}", error.message)]
    PieceFailed { instance: InstanceId, error: PieceFailure },
    #[error("instance {to} is not downstream of {from}")]
    NotReachable { from: InstanceId, to: InstanceId },
}

impl RunRecord {
    pub fn entry(&self, id: InstanceId) -> Option<&PieceEntry> {
        self.entries.iter().find(|e| e.instance_id == id)
    }

    pub(crate) fn entry_mut(&mut self, id: InstanceId) -> &mut PieceEntry {
        self.entries.iter_mut().find(|e| e.instance_id == id).expect("entry for chain member")
    }

    pub fn is_finished(&self) -> bool {
        self.status != RunStatus::Running
    }

    pub fn cache_hits(&self) -> usize {
        self.entries.iter().filter(|e| e.cache_hit).count()
    }

    /// The output of a piece that finished.
    pub fn intermediate_output(&self, id: InstanceId) -> Result<&MediaValue, InspectError> {
        let entry = self.entry(id).ok_or(InspectError::UnknownInstance(id))?;
        match (entry.status, &entry.output, &entry.error) {
            (PieceStatus::Done, Some(v), _) => Ok(v),
            (PieceStatus::Failed, _, Some(error)) => {
                Err(InspectError::PieceFailed { instance: id, error: error.clone() })
            }
            (status, _, _) => Err(InspectError::NotYetComputed { instance: id, status }),
        }
    }

    /// Outputs of an upstream piece and a piece downstream of it, for
    /// side-by-side inspection.
    pub fn trace_pair(
        &self,
        upstream: InstanceId,
        downstream: InstanceId,
    ) -> Result<(&MediaValue, &MediaValue), InspectError> {
        for id in [upstream, downstream] {
            self.entry(id).ok_or(InspectError::UnknownInstance(id))?;
        }
        if !self.chain.reaches(upstream, downstream) {
            return Err(InspectError::NotReachable { from: upstream, to: downstream });
        }
        Ok((self.intermediate_output(upstream)?, self.intermediate_output(downstream)?))
    }

    /// Outputs of the chain's terminal pieces, in execution order.
    pub fn final_outputs(&self) -> Vec<(InstanceId, Option<&MediaValue>)> {
        self.entries
            .iter()
            .filter(|e| !self.chain.connections.iter().any(|c| c.from_instance == e.instance_id))
            .map(|e| (e.instance_id, e.output.as_ref()))
            .collect()
    }

    pub fn progress(&self) -> RunProgress {
        RunProgress {
            pieces: self
                .entries
                .iter()
                .map(|e| {
                    let p = PieceProgress {
                        status: e.status,
                        output: e.output.as_ref().map(ValueSummary::of),
                        cache_hit: e.cache_hit,
                    };
                    (e.instance_id, p)
                })
                .collect(),
            status: self.status,
        }
    }
}

pub fn intermediate_output(record: &RunRecord, id: InstanceId) -> Result<&MediaValue, InspectError> {
    record.intermediate_output(id)
}

pub fn trace_pair(
    record: &RunRecord,
    upstream: InstanceId,
    downstream: InstanceId,
) -> Result<(&MediaValue, &MediaValue), InspectError> {
    record.trace_pair(upstream, downstream)
}

/// What an event says about a value: never the payload itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueSummary {
    pub modality: Modality,
    pub hash: ContentHash,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatTag>,
}

impl ValueSummary {
    pub fn of(value: &MediaValue) -> Self {
        ValueSummary { modality: value.modality, hash: value.content_hash(), format: value.format() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    PieceStarted {
        instance_id: InstanceId,
    },
    PieceDone {
        instance_id: InstanceId,
        output: ValueSummary,
        cache_hit: bool,
        wall_time_ms: u64,
    },
    PieceFailed {
        instance_id: InstanceId,
        error: PieceFailure,
    },
    RunDone {
        status: RunStatus,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEvent {
    pub run_id: String,
    /// Position in the run's event sequence, from 0.
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl RunEvent {
    pub fn name(&self) -> &'static str {
        match self.kind {
            EventKind::PieceStarted { .. } => "piece_started",
            EventKind::PieceDone { .. } => "piece_done",
            EventKind::PieceFailed { .. } => "piece_failed",
            EventKind::RunDone { .. } => "run_done",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, EventKind::RunDone { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceProgress {
    pub status: PieceStatus,
    pub output: Option<ValueSummary>,
    pub cache_hit: bool,
}

/// Run state as seen from the event stream alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunProgress {
    pub pieces: BTreeMap<InstanceId, PieceProgress>,
    pub status: RunStatus,
}

/// Folds an ordered event stream over the chain's pieces. Pieces never
/// started by the time `run_done` arrives were skipped.
pub fn fold_events<'a>(
    order: impl IntoIterator<Item = InstanceId>,
    events: impl IntoIterator<Item = &'a RunEvent>,
) -> RunProgress {
    let mut progress = RunProgress {
        pieces: order
            .into_iter()
            .map(|id| (id, PieceProgress { status: PieceStatus::Pending, output: None, cache_hit: false }))
            .collect(),
        status: RunStatus::Running,
    };
    for event in events {
        match &event.kind {
            EventKind::PieceStarted { instance_id } => {
                if let Some(p) = progress.pieces.get_mut(instance_id) {
                    p.status = PieceStatus::Running;
                }
            }
            EventKind::PieceDone { instance_id, output, cache_hit, .. } => {
                if let Some(p) = progress.pieces.get_mut(instance_id) {
                    p.status = PieceStatus::Done;
                    p.output = Some(output.clone());
                    p.cache_hit = *cache_hit;
                }
            }
            EventKind::PieceFailed { instance_id, .. } => {
                if let Some(p) = progress.pieces.get_mut(instance_id) {
                    p.status = PieceStatus::Failed;
                }
            }
            EventKind::RunDone { status } => {
                progress.status = *status;
                for p in progress.pieces.values_mut() {
                    if p.status == PieceStatus::Pending {
                        p.status = PieceStatus::Skipped;
                    }
                }
            }
        }
    }
    progress
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_wire_shape() {
        let e = RunEvent {
            run_id: "r".into(),
            seq: 3,
            kind: EventKind::PieceStarted { instance_id: InstanceId(2) },
        };
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v, serde_json::json!({"run_id": "r", "seq": 3, "kind": "piece_started", "instance_id": 2}));
        assert_eq!(serde_json::from_value::<RunEvent>(v).unwrap(), e);
        assert_eq!(e.name(), "piece_started");
    }

    #[test]
    fn fold_marks_unstarted_as_skipped() {
        let ev = |seq, kind| RunEvent { run_id: "r".into(), seq, kind };
        let events = [
            ev(0, EventKind::PieceStarted { instance_id: InstanceId(0) }),
            ev(
                1,
                EventKind::PieceFailed {
                    instance_id: InstanceId(0),
                    error: PieceFailure { kind: FailureKind::Timeout, message: "slow".into() },
                },
            ),
            ev(2, EventKind::RunDone { status: RunStatus::Failed }),
        ];
        let p = fold_events([InstanceId(0), InstanceId(1)], &events);
        assert_eq!(p.pieces[&InstanceId(0)].status, PieceStatus::Failed);
        assert_eq!(p.pieces[&InstanceId(1)].status, PieceStatus::Skipped);
        assert_eq!(p.status, RunStatus::Failed);
    }
}
