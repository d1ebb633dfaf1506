//! Sparse multi-particle states over integer angular-momentum labels.
//!
//! A [`SparseState`] stores one complex amplitude per [`MomentumBasisState`]
//! (one integer label per particle of its register). Labels are unbounded; no
//! momentum cutoff is ever applied. Amplitudes whose modulus falls below the
//! prune threshold (default [`DEFAULT_PRUNE_THRESHOLD`]) are dropped after every
//! operation, so exact destructive interference leaves no key behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on unit norm and on probability sums.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Amplitudes with modulus below this are removed from a state.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-14;

/// Identifier of a particle on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticleId(pub usize);

impl fmt::Display for ParticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Ordered tuple of angular-momentum labels, one per register slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MomentumBasisState(Vec<i64>);

impl MomentumBasisState {
    pub fn new(labels: Vec<i64>) -> Self {
        Self(labels)
    }

    pub fn labels(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn project(&self, slots: &[usize]) -> Vec<i64> {
        slots.iter().map(|&s| self.0[s]).collect()
    }
}

impl From<Vec<i64>> for MomentumBasisState {
    fn from(labels: Vec<i64>) -> Self {
        Self(labels)
    }
}

impl fmt::Display for MomentumBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, ">")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("particle {0} appears in both registers")]
    RegisterConflict(ParticleId),
    #[error("particle {0} is listed twice in a register")]
    DuplicateParticle(ParticleId),
    #[error("particle {0} is not in the register")]
    UnknownParticle(ParticleId),
    #[error("basis state has {found} labels but the register has {expected} particles")]
    LengthMismatch { expected: usize, found: usize },
    #[error("state is not normalized (norm squared {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("state has no amplitudes")]
    Empty,
    #[error("registers differ and cannot be compared")]
    RegisterMismatch,
}

/// Probability weights over integer total-momentum values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    weights: BTreeMap<i64, f64>,
}

impl Distribution {
    /// Builds a distribution, summing weights that share a value.
    pub fn from_weights(weights: impl IntoIterator<Item = (i64, f64)>) -> Self {
        let mut out = Self::default();
        for (l, w) in weights {
            out.add(l, w);
        }
        out
    }

    /// All weight on a single value.
    pub fn point(value: i64) -> Self {
        Self::from_weights([(value, 1.0)])
    }

    pub fn add(&mut self, value: i64, weight: f64) {
        *self.weights.entry(value).or_insert(0.0) += weight;
    }

    pub fn get(&self, value: i64) -> f64 {
        self.weights.get(&value).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.weights.iter().map(|(&l, &w)| (l, w))
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.weights.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Moves every weight from `L` to `L + delta`.
    pub fn shifted(&self, delta: i64) -> Self {
        Self {
            weights: self.weights.iter().map(|(&l, &w)| (l + delta, w)).collect(),
        }
    }

    /// Rescales so the weights sum to one. An empty distribution stays empty.
    pub fn normalized(&self) -> Self {
        let total = self.total();
        if total <= 0.0 {
            return self.clone();
        }
        Self {
            weights: self.weights.iter().map(|(&l, &w)| (l, w / total)).collect(),
        }
    }

    /// Largest pointwise difference over the union of both supports.
    pub fn max_deviation(&self, other: &Distribution) -> f64 {
        self.weights
            .keys()
            .chain(other.weights.keys())
            .map(|&l| (self.get(l) - other.get(l)).abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise absolute differences over the union of both supports.
    pub fn deviations(&self, other: &Distribution) -> BTreeMap<i64, f64> {
        self.weights
            .keys()
            .chain(other.weights.keys())
            .map(|&l| (l, (self.get(l) - other.get(l)).abs()))
            .collect()
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (l, w)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}: {w:.6}")?;
        }
        write!(f, "}}")
    }
}

/// One branch of a projective momentum measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub outcome: i64,
    pub probability: f64,
    pub collapsed: SparseState,
}

/// Reduced density matrix of a subset of particles, keyed by (row, column)
/// label tuples over that subset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReducedDensity {
    entries: BTreeMap<(Vec<i64>, Vec<i64>), Complex64>,
}

impl ReducedDensity {
    pub fn entry(&self, row: &[i64], col: &[i64]) -> Complex64 {
        self.entries
            .get(&(row.to_vec(), col.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Vec<i64>, Vec<i64>), &Complex64)> {
        self.entries.iter()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries
            .iter()
            .filter(|((r, c), _)| r == c)
            .map(|(_, v)| *v)
            .sum()
    }

    /// `tr(rho^2)`; one exactly when the subset is in a pure state.
    pub fn purity(&self) -> f64 {
        self.entries
            .iter()
            .map(|((r, c), v)| (v * self.entry(c, r)).re)
            .sum()
    }

    pub fn max_abs_diff(&self, other: &ReducedDensity) -> f64 {
        self.entries
            .keys()
            .chain(other.entries.keys())
            .map(|(r, c)| (self.entry(r, c) - other.entry(r, c)).norm())
            .fold(0.0, f64::max)
    }
}

/// Sparse pure state over a register of particles.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    register: Vec<ParticleId>,
    amplitudes: BTreeMap<MomentumBasisState, Complex64>,
    prune_threshold: f64,
}

fn check_register(register: &[ParticleId]) -> Result<(), StateError> {
    let mut seen = BTreeSet::new();
    for &p in register {
        if !seen.insert(p) {
            return Err(StateError::DuplicateParticle(p));
        }
    }
    Ok(())
}

impl SparseState {
    /// Builds a unit-norm state. Repeated keys are summed; the result must
    /// have unit norm within [`NORM_TOLERANCE`].
    pub fn from_amplitudes<I, K>(register: Vec<ParticleId>, amplitudes: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = (K, Complex64)>,
        K: Into<MomentumBasisState>,
    {
        check_register(&register)?;
        let mut map: BTreeMap<MomentumBasisState, Complex64> = BTreeMap::new();
        for (key, amp) in amplitudes {
            let key = key.into();
            if key.len() != register.len() {
                return Err(StateError::LengthMismatch {
                    expected: register.len(),
                    found: key.len(),
                });
            }
            *map.entry(key).or_default() += amp;
        }
        let state = Self::from_parts(register, map, DEFAULT_PRUNE_THRESHOLD);
        if state.amplitudes.is_empty() {
            return Err(StateError::Empty);
        }
        let norm_sqr = state.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(StateError::NotNormalized { norm_sqr });
        }
        Ok(state)
    }

    /// Like [`SparseState::from_amplitudes`] but rescales to unit norm first.
    pub fn normalized_from<I, K>(register: Vec<ParticleId>, amplitudes: I) -> Result<Self, StateError>
    where
        I: IntoIterator<Item = (K, Complex64)>,
        K: Into<MomentumBasisState>,
    {
        check_register(&register)?;
        let mut map: BTreeMap<MomentumBasisState, Complex64> = BTreeMap::new();
        for (key, amp) in amplitudes {
            let key = key.into();
            if key.len() != register.len() {
                return Err(StateError::LengthMismatch {
                    expected: register.len(),
                    found: key.len(),
                });
            }
            *map.entry(key).or_default() += amp;
        }
        let state = Self::from_parts(register, map, DEFAULT_PRUNE_THRESHOLD);
        let norm_sqr = state.norm_sqr();
        if state.amplitudes.is_empty() || norm_sqr == 0.0 {
            return Err(StateError::Empty);
        }
        Ok(state.scaled(1.0 / norm_sqr.sqrt()))
    }

    /// A momentum eigenstate.
    pub fn basis(register: Vec<ParticleId>, labels: Vec<i64>) -> Result<Self, StateError> {
        Self::from_amplitudes(register, [(labels, Complex64::new(1.0, 0.0))])
    }

    /// Internal constructor: prunes but does not check the norm.
    pub(crate) fn from_parts(
        register: Vec<ParticleId>,
        mut amplitudes: BTreeMap<MomentumBasisState, Complex64>,
        prune_threshold: f64,
    ) -> Self {
        amplitudes.retain(|_, a| a.norm() >= prune_threshold);
        Self {
            register,
            amplitudes,
            prune_threshold,
        }
    }

    pub(crate) fn rebuild(&self, register: Vec<ParticleId>, amplitudes: BTreeMap<MomentumBasisState, Complex64>) -> Self {
        Self::from_parts(register, amplitudes, self.prune_threshold)
    }

    /// Same state with a different prune threshold (applied immediately).
    pub fn with_prune_threshold(self, threshold: f64) -> Self {
        Self::from_parts(self.register, self.amplitudes, threshold)
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    pub fn register(&self) -> &[ParticleId] {
        &self.register
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MomentumBasisState, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, labels: &[i64]) -> Complex64 {
        self.amplitudes
            .get(&MomentumBasisState(labels.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn contains(&self, p: ParticleId) -> bool {
        self.register.contains(&p)
    }

    /// Register position of particle `p`.
    pub fn slot(&self, p: ParticleId) -> Result<usize, StateError> {
        self.register
            .iter()
            .position(|&q| q == p)
            .ok_or(StateError::UnknownParticle(p))
    }

    fn slots(&self, subset: &[ParticleId]) -> Result<Vec<usize>, StateError> {
        let unique: BTreeSet<ParticleId> = subset.iter().copied().collect();
        unique.into_iter().map(|p| self.slot(p)).collect()
    }

    fn scaled(&self, factor: f64) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| (k.clone(), a * factor))
            .collect();
        self.rebuild(self.register.clone(), amplitudes)
    }

    /// Tensor product; the register of `other` is appended.
    pub fn tensor(&self, other: &SparseState) -> Result<SparseState, StateError> {
        if let Some(&p) = other.register.iter().find(|p| self.register.contains(p)) {
            return Err(StateError::RegisterConflict(p));
        }
        let mut register = self.register.clone();
        register.extend_from_slice(&other.register);
        let mut amplitudes = BTreeMap::new();
        for (ka, a) in &self.amplitudes {
            for (kb, b) in &other.amplitudes {
                let mut labels = ka.0.clone();
                labels.extend_from_slice(&kb.0);
                amplitudes.insert(MomentumBasisState(labels), a * b);
            }
        }
        Ok(self.rebuild(register, amplitudes))
    }

    /// Distribution of the summed labels of `subset`.
    pub fn total_momentum_distribution(&self, subset: &[ParticleId]) -> Result<Distribution, StateError> {
        let slots = self.slots(subset)?;
        let mut dist = Distribution::default();
        for (key, amp) in &self.amplitudes {
            let total: i64 = slots.iter().map(|&s| key.0[s]).sum();
            dist.add(total, amp.norm_sqr());
        }
        Ok(dist)
    }

    /// Projective measurement of `Σ coeffs[i] · L_i`, one coefficient per
    /// register slot. Outcomes are sorted ascending; each collapsed state is
    /// renormalized.
    pub fn measure_combination(&self, coeffs: &[i64]) -> Result<Vec<MeasurementOutcome>, StateError> {
        if coeffs.len() != self.register.len() {
            return Err(StateError::LengthMismatch {
                expected: self.register.len(),
                found: coeffs.len(),
            });
        }
        let mut sectors: BTreeMap<i64, BTreeMap<MomentumBasisState, Complex64>> = BTreeMap::new();
        for (key, amp) in &self.amplitudes {
            let value: i64 = key.0.iter().zip(coeffs).map(|(l, c)| l * c).sum();
            sectors.entry(value).or_default().insert(key.clone(), *amp);
        }
        let total = self.norm_sqr();
        Ok(sectors
            .into_iter()
            .map(|(outcome, amps)| {
                let weight: f64 = amps.values().map(|a| a.norm_sqr()).sum();
                let collapsed = self.rebuild(self.register.clone(), amps).scaled(1.0 / weight.sqrt());
                MeasurementOutcome {
                    outcome,
                    probability: weight / total,
                    collapsed,
                }
            })
            .collect())
    }

    /// Projective measurement of the angular momentum of `p`.
    pub fn measure_momentum(&self, p: ParticleId) -> Result<Vec<MeasurementOutcome>, StateError> {
        let slot = self.slot(p)?;
        let mut coeffs = vec![0; self.register.len()];
        coeffs[slot] = 1;
        self.measure_combination(&coeffs)
    }

    /// Applies `e^{i θ_p delta}`: every label of `p` is raised by `delta`.
    pub fn shift_particle(&self, p: ParticleId, delta: i64) -> Result<SparseState, StateError> {
        let slot = self.slot(p)?;
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| {
                let mut labels = k.0.clone();
                labels[slot] += delta;
                (MomentumBasisState(labels), *a)
            })
            .collect();
        Ok(self.rebuild(self.register.clone(), amplitudes))
    }

    /// Same state with its register permuted into `ordering`.
    pub fn reorder(&self, ordering: &[ParticleId]) -> Result<SparseState, StateError> {
        if ordering.len() != self.register.len() {
            return Err(StateError::LengthMismatch {
                expected: self.register.len(),
                found: ordering.len(),
            });
        }
        check_register(ordering)?;
        let slots: Vec<usize> = ordering.iter().map(|&p| self.slot(p)).collect::<Result<_, _>>()?;
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| (MomentumBasisState(k.project(&slots)), *a))
            .collect();
        Ok(self.rebuild(ordering.to_vec(), amplitudes))
    }

    /// Largest amplitude difference against `other`, after aligning registers.
    pub fn max_abs_diff(&self, other: &SparseState) -> Result<f64, StateError> {
        let aligned;
        let other = if other.register == self.register {
            other
        } else {
            let mine: BTreeSet<_> = self.register.iter().collect();
            let theirs: BTreeSet<_> = other.register.iter().collect();
            if mine != theirs {
                return Err(StateError::RegisterMismatch);
            }
            aligned = other.reorder(&self.register)?;
            &aligned
        };
        Ok(self
            .amplitudes
            .keys()
            .chain(other.amplitudes.keys())
            .map(|k| (self.amplitudes.get(k).copied().unwrap_or_default() - other.amplitudes.get(k).copied().unwrap_or_default()).norm())
            .fold(0.0, f64::max))
    }

    /// Reduced density matrix of `subset` (particle order as given).
    pub fn reduced_density(&self, subset: &[ParticleId]) -> Result<ReducedDensity, StateError> {
        check_register(subset)?;
        let keep: Vec<usize> = subset.iter().map(|&p| self.slot(p)).collect::<Result<_, _>>()?;
        let rest: Vec<usize> = (0..self.register.len()).filter(|s| !keep.contains(s)).collect();
        let mut by_rest: BTreeMap<Vec<i64>, Vec<(Vec<i64>, Complex64)>> = BTreeMap::new();
        for (key, amp) in &self.amplitudes {
            by_rest
                .entry(key.project(&rest))
                .or_default()
                .push((key.project(&keep), *amp));
        }
        let mut entries: BTreeMap<(Vec<i64>, Vec<i64>), Complex64> = BTreeMap::new();
        for terms in by_rest.values() {
            for (row, a) in terms {
                for (col, b) in terms {
                    *entries.entry((row.clone(), col.clone())).or_default() += a * b.conj();
                }
            }
        }
        Ok(ReducedDensity { entries })
    }

    /// Number of singular values above `tol` of the amplitude matrix split
    /// between `subset` and the rest of the register.
    pub fn schmidt_rank(&self, subset: &[ParticleId], tol: f64) -> Result<usize, StateError> {
        let keep = self.slots(subset)?;
        let rest: Vec<usize> = (0..self.register.len()).filter(|s| !keep.contains(s)).collect();
        let mut rows: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        let mut cols: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        for key in self.amplitudes.keys() {
            let n = rows.len();
            rows.entry(key.project(&keep)).or_insert(n);
            let n = cols.len();
            cols.entry(key.project(&rest)).or_insert(n);
        }
        if rows.is_empty() {
            return Ok(0);
        }
        let mut m = DMatrix::<Complex64>::zeros(rows.len(), cols.len());
        for (key, amp) in &self.amplitudes {
            m[(rows[&key.project(&keep)], cols[&key.project(&rest)])] = *amp;
        }
        let svd = m.svd(false, false);
        Ok(svd.singular_values.iter().filter(|&&s| s > tol).count())
    }
}

impl fmt::Display for SparseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, amp) in &self.amplitudes {
            writeln!(f, "{:+.6}{:+.6}i {}", amp.re, amp.im, key)?;
        }
        Ok(())
    }
}
