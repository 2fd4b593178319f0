use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate, InstanceId, MosaicGraph, UnknownSpec, Violation};
use crate::catalog::Catalog;

/// One weakly connected component of a mosaic, in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub index: usize,
    /// Every piece appears after all of its producers.
    pub order: Vec<InstanceId>,
}

impl Chain {
    pub fn contains(&self, id: InstanceId) -> bool {
        self.order.contains(&id)
    }

    /// The pieces whose output no other piece of the chain consumes.
    pub fn terminals(&self, graph: &MosaicGraph) -> Vec<InstanceId> {
        self.order
            .iter()
            .copied()
            .filter(|&id| graph.outgoing(id).next().is_none())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error(transparent)]
    UnknownSpec(#[from] UnknownSpec),
    #[error("mosaic has {} violation(s)", .0.len())]
    InvalidMosaic(Vec<Violation>),
}

/// Splits a valid mosaic into chains ordered by their lowest instance id.
/// Within a chain, ties in the topological order go to the lower id.
pub fn chains(graph: &MosaicGraph, catalog: &Catalog) -> Result<Vec<Chain>, ChainError> {
    let violations = validate(graph, catalog)?;
    if !violations.is_empty() {
        return Err(ChainError::InvalidMosaic(violations));
    }
    Ok(chains_of_acyclic(graph))
}

pub(crate) fn chains_of_acyclic(graph: &MosaicGraph) -> Vec<Chain> {
    // Union-find over instance ids.
    let ids: Vec<InstanceId> = graph.instance_ids().collect();
    let index: BTreeMap<InstanceId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in graph.connections() {
        let (a, b) = (index[&c.from_instance], index[&c.to_instance]);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            // Keep the smaller index as root so components sort by lowest id.
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut components: BTreeMap<usize, BTreeSet<InstanceId>> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        let root = find(&mut parent, i);
        components.entry(root).or_default().insert(id);
    }

    components
        .into_values()
        .enumerate()
        .map(|(index, members)| Chain { index, order: topological_order(graph, &members) })
        .collect()
}

fn topological_order(graph: &MosaicGraph, members: &BTreeSet<InstanceId>) -> Vec<InstanceId> {
    let mut indegree: BTreeMap<InstanceId, usize> = members.iter().map(|&id| (id, 0)).collect();
    for c in graph.connections() {
        if members.contains(&c.to_instance) {
            *indegree.get_mut(&c.to_instance).expect("member") += 1;
        }
    }
    let mut ready: BTreeSet<InstanceId> =
        indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
    let mut order = Vec::with_capacity(members.len());
    while let Some(id) = ready.pop_first() {
        order.push(id);
        for c in graph.outgoing(id) {
            let d = indegree.get_mut(&c.to_instance).expect("member");
            *d -= 1;
            if *d == 0 {
                ready.insert(c.to_instance);
            }
        }
    }
    order
}
