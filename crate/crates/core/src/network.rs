//! Preparation networks: who prepared whom, the preparation interaction
//! itself, and which particles take part in individual-case conservation.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::statevec::{MomentumBasisState, ParticleId, SparseState, StateError};
use crate::wavefun::Wavefunction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("particle {0} is not in the network")]
    UnknownNode(ParticleId),
    #[error("particle {0} has already been prepared")]
    AlreadyPrepared(ParticleId),
    #[error("preparing {system} from {frame} would create a cycle")]
    Cycle { frame: ParticleId, system: ParticleId },
    #[error("a particle cannot prepare itself ({0})")]
    SelfPreparation(ParticleId),
    #[error("system {0} is not in the zero angular-momentum sector")]
    SystemNotVirgin(ParticleId),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Directed forest of preparations: each edge points from a prepared
/// particle to the frame that prepared it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameNetwork {
    nodes: BTreeSet<ParticleId>,
    parents: BTreeMap<ParticleId, ParticleId>,
}

/// An interaction between two particles, in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub participants: (ParticleId, ParticleId),
    pub order: usize,
}

impl FrameNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes(nodes: impl IntoIterator<Item = ParticleId>) -> Self {
        Self {
            nodes: nodes.into_iter().collect(),
            parents: BTreeMap::new(),
        }
    }

    pub fn add_node(&mut self, p: ParticleId) {
        self.nodes.insert(p);
    }

    pub fn contains(&self, p: ParticleId) -> bool {
        self.nodes.contains(&p)
    }

    pub fn nodes(&self) -> impl Iterator<Item = ParticleId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn parent(&self, p: ParticleId) -> Option<ParticleId> {
        self.parents.get(&p).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (ParticleId, ParticleId)> + '_ {
        self.parents.iter().map(|(&c, &p)| (c, p))
    }

    pub fn roots(&self) -> impl Iterator<Item = ParticleId> + '_ {
        self.nodes.iter().copied().filter(|p| !self.parents.contains_key(p))
    }

    pub fn children(&self, p: ParticleId) -> impl Iterator<Item = ParticleId> + '_ {
        self.parents.iter().filter(move |(_, &f)| f == p).map(|(&c, _)| c)
    }

    /// Records that `frame` prepared `system`. Both are added as nodes if new.
    pub fn add_preparation(&mut self, frame: ParticleId, system: ParticleId) -> Result<(), NetworkError> {
        if frame == system {
            return Err(NetworkError::SelfPreparation(frame));
        }
        if self.parents.contains_key(&system) {
            return Err(NetworkError::AlreadyPrepared(system));
        }
        if self.nodes.contains(&frame) && self.ancestry(frame)?.contains(&system) {
            return Err(NetworkError::Cycle { frame, system });
        }
        self.nodes.insert(frame);
        self.nodes.insert(system);
        self.parents.insert(system, frame);
        Ok(())
    }

    /// `p` followed by its parent, grandparent, ... up to its root.
    pub fn ancestry(&self, p: ParticleId) -> Result<Vec<ParticleId>, NetworkError> {
        if !self.nodes.contains(&p) {
            return Err(NetworkError::UnknownNode(p));
        }
        let mut chain = vec![p];
        let mut cur = p;
        while let Some(parent) = self.parent(cur) {
            chain.push(parent);
            cur = parent;
        }
        Ok(chain)
    }

    /// Lowest common ancestor of `a` and `b`, where a node counts as its own
    /// ancestor. `None` when they sit in different trees.
    pub fn first_common_frame(&self, a: ParticleId, b: ParticleId) -> Result<Option<ParticleId>, NetworkError> {
        let up_a: BTreeSet<ParticleId> = self.ancestry(a)?.into_iter().collect();
        Ok(self.ancestry(b)?.into_iter().find(|p| up_a.contains(p)))
    }

    fn common_frame_of(&self, members: &BTreeSet<ParticleId>) -> Result<Option<ParticleId>, NetworkError> {
        let mut iter = members.iter().copied();
        let Some(mut acc) = iter.next() else {
            return Ok(None);
        };
        for p in iter {
            match self.first_common_frame(acc, p)? {
                Some(f) => acc = f,
                None => return Ok(None),
            }
        }
        Ok(Some(acc))
    }

    /// Particles over which individual-case conservation is expected to hold.
    ///
    /// Without cross-branch interactions this is each measured particle and
    /// its direct frame. Particles joined by an interaction between different
    /// ancestries are grouped, and every ancestor path of the group up to and
    /// including the group's first common frame is added. A group with no
    /// common frame contributes its full ancestries.
    pub fn conserving_set(
        &self,
        measured: &BTreeSet<ParticleId>,
        interactions: &[InteractionEvent],
    ) -> Result<BTreeSet<ParticleId>, NetworkError> {
        for &p in measured {
            if !self.nodes.contains(&p) {
                return Err(NetworkError::UnknownNode(p));
            }
        }
        let mut groups: Vec<BTreeSet<ParticleId>> = measured.iter().map(|&p| BTreeSet::from([p])).collect();
        let mut linked: Vec<bool> = vec![false; groups.len()];
        let mut ordered = interactions.to_vec();
        ordered.sort_by_key(|e| e.order);
        for event in ordered {
            let (p, q) = event.participants;
            let cross = self.ancestry(p)?[1..] != self.ancestry(q)?[1..];
            let gp = groups.iter().position(|g| g.contains(&p));
            let gq = groups.iter().position(|g| g.contains(&q));
            let idx = match (gp, gq) {
                (Some(i), Some(j)) if i == j => i,
                (Some(i), Some(j)) => {
                    let (lo, hi) = (i.min(j), i.max(j));
                    let moved = groups.remove(hi);
                    let flag = linked.remove(hi);
                    groups[lo].extend(moved);
                    linked[lo] |= flag;
                    lo
                }
                (Some(i), None) => {
                    groups[i].insert(q);
                    i
                }
                (None, Some(j)) => {
                    groups[j].insert(p);
                    j
                }
                (None, None) => {
                    groups.push(BTreeSet::from([p, q]));
                    linked.push(false);
                    groups.len() - 1
                }
            };
            linked[idx] |= cross;
        }

        let mut out = BTreeSet::new();
        for (group, cross) in groups.iter().zip(&linked) {
            if !cross {
                for &p in group {
                    out.insert(p);
                    if let Some(f) = self.parent(p) {
                        out.insert(f);
                    }
                }
                continue;
            }
            let top = self.common_frame_of(group)?;
            for &p in group {
                for a in self.ancestry(p)? {
                    out.insert(a);
                    if Some(a) == top {
                        break;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Prepares `system` relative to `frame` with wavefunction `chi`.
///
/// Defined only on states where `system` has zero angular momentum in every
/// basis term: each term `|…, l_f, …, 0, …⟩` with amplitude `a` becomes
/// `Σ_l chi(l) · a · |…, l_f − l, …, l, …⟩`. The network gains the edge
/// `system → frame`.
pub fn prepare(
    state: &SparseState,
    frame: ParticleId,
    system: ParticleId,
    chi: &Wavefunction,
    net: &FrameNetwork,
) -> Result<(SparseState, FrameNetwork), NetworkError> {
    if frame == system {
        return Err(NetworkError::SelfPreparation(frame));
    }
    let fs = state.slot(frame)?;
    let ss = state.slot(system)?;
    if state.iter().any(|(k, _)| k.labels()[ss] != 0) {
        return Err(NetworkError::SystemNotVirgin(system));
    }
    let mut net = net.clone();
    for p in state.register() {
        net.add_node(*p);
    }
    net.add_preparation(frame, system)?;

    let mut amplitudes: BTreeMap<MomentumBasisState, Complex64> = BTreeMap::new();
    for (key, a) in state.iter() {
        for (l, c) in chi.iter() {
            let mut labels = key.labels().to_vec();
            labels[fs] -= l;
            labels[ss] = l;
            *amplitudes.entry(MomentumBasisState::new(labels)).or_default() += c * a;
        }
    }
    Ok((state.rebuild(state.register().to_vec(), amplitudes), net))
}
