use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Connection, InstanceId, MosaicGraph};
use crate::catalog::Catalog;
use crate::modality::compatible;
use crate::piece::ParamError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    /// Producer output cannot flow into the consumer's input channel.
    IncompatibleConnection,
    /// More than one connection targets the same input channel.
    OccupiedInputChannel,
    /// The connection lies on a directed cycle.
    CycleDetected,
    /// A connection endpoint names a piece that does not exist.
    DanglingConnection,
    /// The channel index is outside the consumer's input arity.
    InvalidChannel,
    ParameterOutOfBounds,
    InvalidParameterType,
    UnknownParameter,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<Connection>,
    pub message: String,
}

impl Violation {
    fn on_connection(code: ViolationCode, connection: Connection, message: String) -> Self {
        Violation { code, instance: Some(connection.to_instance), connection: Some(connection), message }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("piece {instance} uses unknown spec `{spec_id}`")]
pub struct UnknownSpec {
    pub instance: InstanceId,
    pub spec_id: String,
}

/// Checks every connection, parameter and acyclicity rule. An empty list
/// means the mosaic is valid.
pub fn validate(graph: &MosaicGraph, catalog: &Catalog) -> Result<Vec<Violation>, UnknownSpec> {
    for piece in graph.pieces() {
        if !catalog.contains(&piece.spec_id) {
            return Err(UnknownSpec { instance: piece.instance_id, spec_id: piece.spec_id.clone() });
        }
    }
    let spec_of = |id: InstanceId| graph.piece(id).and_then(|p| catalog.get(&p.spec_id));
    let mut violations = Vec::new();

    for piece in graph.pieces() {
        let spec = catalog.get(&piece.spec_id).expect("checked above");
        for (name, value) in &piece.parameter_values {
            if let Err(err) = spec.check_parameter(name, value) {
                let code = match err {
                    ParamError::OutOfBounds { .. } | ParamError::UnknownVariant { .. } => {
                        ViolationCode::ParameterOutOfBounds
                    }
                    ParamError::TypeMismatch { .. } => ViolationCode::InvalidParameterType,
                    ParamError::UnknownParameter(_) => ViolationCode::UnknownParameter,
                };
                violations.push(Violation {
                    code,
                    instance: Some(piece.instance_id),
                    connection: None,
                    message: format!("piece {}: {err}", piece.instance_id),
                });
            }
        }
    }

    let mut occupied = BTreeSet::new();
    for &c in graph.connections() {
        let (Some(from), Some(to)) = (spec_of(c.from_instance), spec_of(c.to_instance)) else {
            violations.push(Violation::on_connection(
                ViolationCode::DanglingConnection,
                c,
                format!("connection {c} references a missing piece"),
            ));
            continue;
        };
        let Some(socket) = to.input_sockets.get(usize::from(c.to_channel)) else {
            violations.push(Violation::on_connection(
                ViolationCode::InvalidChannel,
                c,
                format!("`{}` has no input channel {}", to.spec_id, c.to_channel),
            ));
            continue;
        };
        if !occupied.insert((c.to_instance, c.to_channel)) {
            violations.push(Violation::on_connection(
                ViolationCode::OccupiedInputChannel,
                c,
                format!("input channel {} of piece {} has more than one source", c.to_channel, c.to_instance),
            ));
        }
        if !compatible(from.output_modality(), socket.modality) {
            violations.push(Violation::on_connection(
                ViolationCode::IncompatibleConnection,
                c,
                format!(
                    "{} output of `{}` cannot feed {} input of `{}`",
                    from.output_modality().label(),
                    from.spec_id,
                    socket.modality.label(),
                    to.spec_id
                ),
            ));
        }
    }

    // A connection u -> v is on a cycle exactly when v reaches u.
    for &c in graph.connections() {
        if graph.piece(c.from_instance).is_some()
            && graph.piece(c.to_instance).is_some()
            && graph.reaches(c.to_instance, c.from_instance)
        {
            violations.push(Violation::on_connection(
                ViolationCode::CycleDetected,
                c,
                format!("connection {c} closes a cycle"),
            ));
        }
    }

    Ok(violations)
}
