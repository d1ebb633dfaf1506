//! Momentum-conserving two-particle interactions, pipelines of events, and
//! the individual-case conservation checker.
//!
//! Interactions are given extensionally: a finite support of label pairs and
//! the matrix elements between them. A valid interaction is block diagonal in
//! the pair's total momentum with a unitary block for every total. Pairs
//! outside the support act as the identity, but only when no block exists for
//! their total; anything else is an explicit error.
//!
//! Tolerances: algebraic identities use 1e-12, comparisons against oracles
//! and the conservation verdict use 1e-10, and branches with probability
//! below 1e-14 are left out of reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::network::{prepare, FrameNetwork, InteractionEvent, NetworkError};
use crate::statevec::{Distribution, MomentumBasisState, ParticleId, SparseState, StateError};
use crate::wavefun::Wavefunction;
use crate::{ALGEBRAIC_TOLERANCE, CHECK_TOLERANCE, MIN_BRANCH_PROBABILITY};

/// Labels `(l_p, l_q)` of an interacting pair.
pub type Pair = (i64, i64);

fn total(pair: Pair) -> i64 {
    pair.0 + pair.1
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("interaction is not momentum conserving: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidInteraction(Vec<Diagnostic>),
    #[error("pair ({}, {}) has total {} which the interaction covers only partially", .pair.0, .pair.1, .pair.0 + .pair.1)]
    SupportViolation { pair: Pair },
    #[error("an interaction needs two distinct particles, got {0} twice")]
    SameParticle(ParticleId),
    #[error("conserving set is empty")]
    EmptyConservingSet,
    #[error("reference point {index} is outside 0..={len}")]
    ReferenceOutOfRange { index: usize, len: usize },
    #[error("event {index}: {source}")]
    AtEvent {
        index: usize,
        #[source]
        source: Box<DynamicsError>,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Why an interaction failed validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// A nonzero matrix element between different total momenta.
    CrossTotal {
        from: Pair,
        to: Pair,
        from_total: i64,
        to_total: i64,
        amplitude: [f64; 2],
    },
    /// `U†U` differs from the identity inside one block.
    NotUnitary {
        total: i64,
        row: Pair,
        col: Pair,
        value: [f64; 2],
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::CrossTotal {
                from,
                to,
                from_total,
                to_total,
                amplitude,
            } => write!(
                f,
                "<{},{}|U|{},{}> = {}{:+}i maps total {} to total {}",
                to.0, to.1, from.0, from.1, amplitude[0], amplitude[1], from_total, to_total
            ),
            Diagnostic::NotUnitary { total, row, col, value } => write!(
                f,
                "block {}: (U^dag U)[({},{}),({},{})] = {}{:+}i",
                total, row.0, row.1, col.0, col.1, value[0], value[1]
            ),
        }
    }
}

/// Outcome of [`validate_momentum_conserving`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub diagnostics: Vec<Diagnostic>,
}

/// One total-momentum block: `matrix[row][col] = <basis[row]|U|basis[col]>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub total: i64,
    pub basis: Vec<Pair>,
    pub matrix: Vec<Vec<Complex64>>,
}

/// A two-particle interaction given by its matrix elements on a finite
/// support of label pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionSpec {
    support: BTreeSet<Pair>,
    // (out, in) -> <out|U|in>
    entries: BTreeMap<(Pair, Pair), Complex64>,
}

impl InteractionSpec {
    /// Empty support: every pair passes through unchanged.
    pub fn identity() -> Self {
        Self::default()
    }

    /// Matrix elements `(in, out, <out|U|in>)`. Every mentioned pair joins the
    /// support; repeated elements are summed.
    pub fn from_entries(entries: impl IntoIterator<Item = (Pair, Pair, Complex64)>) -> Self {
        let mut spec = Self::default();
        for (input, output, amp) in entries {
            spec.support.insert(input);
            spec.support.insert(output);
            *spec.entries.entry((output, input)).or_default() += amp;
        }
        spec
    }

    /// Assembles an interaction from explicit blocks. The caller is
    /// responsible for giving each block pairs of the stated total;
    /// [`validate_momentum_conserving`] reports any that are not.
    pub fn from_blocks(blocks: impl IntoIterator<Item = Block>) -> Self {
        let mut spec = Self::default();
        for block in blocks {
            for &p in &block.basis {
                spec.support.insert(p);
            }
            for (r, row) in block.matrix.iter().enumerate() {
                for (c, &amp) in row.iter().enumerate() {
                    if amp != Complex64::default() {
                        spec.entries.insert((block.basis[r], block.basis[c]), amp);
                    }
                }
            }
        }
        spec
    }

    /// `|00⟩ → |00⟩`, `|01⟩ → (|01⟩+|10⟩)/√2`, `|10⟩ → (−|01⟩+|10⟩)/√2`,
    /// `|11⟩ → |11⟩`.
    pub fn beamsplitter() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let one = Complex64::new(1.0, 0.0);
        Self::from_entries([
            ((0, 0), (0, 0), one),
            ((0, 1), (0, 1), h),
            ((0, 1), (1, 0), h),
            ((1, 0), (0, 1), -h),
            ((1, 0), (1, 0), h),
            ((1, 1), (1, 1), one),
        ])
    }

    /// Exchanges the two labels for every pair inside `labels × labels`.
    pub fn swap(labels: RangeInclusive<i64>) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let mut entries = Vec::new();
        for a in labels.clone() {
            for b in labels.clone() {
                entries.push(((a, b), (b, a), one));
            }
        }
        Self::from_entries(entries)
    }

    pub fn support(&self) -> &BTreeSet<Pair> {
        &self.support
    }

    /// `<out|U|in>`.
    pub fn element(&self, output: Pair, input: Pair) -> Complex64 {
        self.entries.get(&(output, input)).copied().unwrap_or_default()
    }

    /// Nonzero matrix elements as `(in, out, amplitude)`.
    pub fn entries(&self) -> impl Iterator<Item = (Pair, Pair, Complex64)> + '_ {
        self.entries.iter().map(|(&(o, i), &a)| (i, o, a))
    }

    pub fn totals(&self) -> BTreeSet<i64> {
        self.support.iter().map(|&p| total(p)).collect()
    }

    /// Support grouped by total momentum, with the same-total elements.
    pub fn blocks(&self) -> BTreeMap<i64, Block> {
        let mut bases: BTreeMap<i64, Vec<Pair>> = BTreeMap::new();
        for &p in &self.support {
            bases.entry(total(p)).or_default().push(p);
        }
        bases
            .into_iter()
            .map(|(t, basis)| {
                let matrix = basis
                    .iter()
                    .map(|&row| basis.iter().map(|&col| self.element(row, col)).collect())
                    .collect();
                (t, Block { total: t, basis, matrix })
            })
            .collect()
    }
}

/// Checks block structure and per-block unitarity.
pub fn validate_momentum_conserving(u: &InteractionSpec) -> ValidationReport {
    let mut diagnostics = Vec::new();
    for (&(out, input), &amp) in &u.entries {
        if amp.norm() >= crate::statevec::DEFAULT_PRUNE_THRESHOLD && total(out) != total(input) {
            diagnostics.push(Diagnostic::CrossTotal {
                from: input,
                to: out,
                from_total: total(input),
                to_total: total(out),
                amplitude: [amp.re, amp.im],
            });
        }
    }
    for (t, block) in u.blocks() {
        let n = block.basis.len();
        'block: for i in 0..n {
            for j in 0..n {
                let v: Complex64 = (0..n).map(|k| block.matrix[k][i].conj() * block.matrix[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (v - Complex64::new(expected, 0.0)).norm() > ALGEBRAIC_TOLERANCE {
                    diagnostics.push(Diagnostic::NotUnitary {
                        total: t,
                        row: block.basis[i],
                        col: block.basis[j],
                        value: [v.re, v.im],
                    });
                    break 'block;
                }
            }
        }
    }
    ValidationReport {
        valid: diagnostics.is_empty(),
        diagnostics,
    }
}

/// Applies `u` to the labels of `(p, q)`.
pub fn apply_interaction(
    s: &SparseState,
    p: ParticleId,
    q: ParticleId,
    u: &InteractionSpec,
) -> Result<SparseState, DynamicsError> {
    if p == q {
        return Err(DynamicsError::SameParticle(p));
    }
    let report = validate_momentum_conserving(u);
    if !report.valid {
        return Err(DynamicsError::InvalidInteraction(report.diagnostics));
    }
    let sp = s.slot(p)?;
    let sq = s.slot(q)?;
    let mut columns: BTreeMap<Pair, Vec<(Pair, Complex64)>> = BTreeMap::new();
    for (&(out, input), &amp) in &u.entries {
        columns.entry(input).or_default().push((out, amp));
    }
    let totals = u.totals();

    let mut amplitudes: BTreeMap<MomentumBasisState, Complex64> = BTreeMap::new();
    for (key, a) in s.iter() {
        let labels = key.labels();
        let pair = (labels[sp], labels[sq]);
        if u.support.contains(&pair) {
            for &(out, amp) in columns.get(&pair).into_iter().flatten() {
                let mut next = labels.to_vec();
                next[sp] = out.0;
                next[sq] = out.1;
                *amplitudes.entry(MomentumBasisState::new(next)).or_default() += amp * a;
            }
        } else if totals.contains(&total(pair)) {
            return Err(DynamicsError::SupportViolation { pair });
        } else {
            *amplitudes.entry(key.clone()).or_default() += a;
        }
    }
    Ok(s.rebuild(s.register().to_vec(), amplitudes))
}

/// One step of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Prepare {
        frame: ParticleId,
        system: ParticleId,
        chi: Wavefunction,
    },
    Interact {
        p: ParticleId,
        q: ParticleId,
        spec: InteractionSpec,
    },
    Measure {
        particle: ParticleId,
    },
}

/// A run of measurement outcomes and the conditional state it leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Measurement outcomes so far, in event order.
    pub outcomes: Vec<(ParticleId, i64)>,
    /// Absolute probability of this run.
    pub probability: f64,
    pub state: SparseState,
}

/// Every branch after every prefix of a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// `snapshots[k]` holds the branches after the first `k` events.
    pub snapshots: Vec<Vec<Branch>>,
    pub network: FrameNetwork,
}

impl Trace {
    pub fn final_branches(&self) -> &[Branch] {
        self.snapshots.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn branches_at(&self, k: usize) -> Option<&[Branch]> {
        self.snapshots.get(k).map(Vec::as_slice)
    }

    /// Largest change of the full-register total-momentum distribution across
    /// any event: per branch for unitary events, and for the probability
    /// mixture across measurements.
    pub fn statistical_drift(&self) -> Result<f64, StateError> {
        let mut worst: f64 = 0.0;
        for pair in self.snapshots.windows(2) {
            let (before, after) = (&pair[0], &pair[1]);
            if before.len() == after.len() {
                for (b, a) in before.iter().zip(after) {
                    let full = b.state.register().to_vec();
                    let d = b
                        .state
                        .total_momentum_distribution(&full)?
                        .max_deviation(&a.state.total_momentum_distribution(&full)?);
                    worst = worst.max(d);
                }
            }
            worst = worst.max(mixture(before)?.max_deviation(&mixture(after)?));
        }
        Ok(worst)
    }
}

fn mixture(branches: &[Branch]) -> Result<Distribution, StateError> {
    let mut out = Distribution::default();
    for b in branches {
        let full = b.state.register().to_vec();
        for (l, w) in b.state.total_momentum_distribution(&full)?.iter() {
            out.add(l, w * b.probability);
        }
    }
    Ok(out)
}

/// An initial state, the network it starts from, and a list of events.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub initial: SparseState,
    pub network: FrameNetwork,
    pub events: Vec<Event>,
}

impl Pipeline {
    pub fn new(initial: SparseState) -> Self {
        let network = FrameNetwork::with_nodes(initial.register().iter().copied());
        Self {
            initial,
            network,
            events: Vec::new(),
        }
    }

    pub fn prepare(mut self, frame: ParticleId, system: ParticleId, chi: Wavefunction) -> Self {
        self.events.push(Event::Prepare { frame, system, chi });
        self
    }

    pub fn interact(mut self, p: ParticleId, q: ParticleId, spec: InteractionSpec) -> Self {
        self.events.push(Event::Interact { p, q, spec });
        self
    }

    pub fn measure(mut self, particle: ParticleId) -> Self {
        self.events.push(Event::Measure { particle });
        self
    }

    /// Index just after the last preparation (0 without preparations).
    pub fn default_reference_point(&self) -> usize {
        self.events
            .iter()
            .rposition(|e| matches!(e, Event::Prepare { .. }))
            .map_or(0, |i| i + 1)
    }

    pub fn interaction_events(&self) -> Vec<InteractionEvent> {
        self.events
            .iter()
            .enumerate()
            .filter_map(|(order, e)| match e {
                Event::Interact { p, q, .. } => Some(InteractionEvent {
                    participants: (*p, *q),
                    order,
                }),
                _ => None,
            })
            .collect()
    }

    pub fn measured(&self) -> BTreeSet<ParticleId> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Measure { particle } => Some(*particle),
                _ => None,
            })
            .collect()
    }

    /// Runs every event, enumerating all measurement branches.
    pub fn execute(&self) -> Result<Trace, DynamicsError> {
        let mut network = self.network.clone();
        let mut current = vec![Branch {
            outcomes: Vec::new(),
            probability: 1.0,
            state: self.initial.clone(),
        }];
        let mut snapshots = vec![current.clone()];
        for (index, event) in self.events.iter().enumerate() {
            let at = |e: DynamicsError| DynamicsError::AtEvent {
                index,
                source: Box::new(e),
            };
            let mut next = Vec::with_capacity(current.len());
            match event {
                Event::Prepare { frame, system, chi } => {
                    let mut net_after = None;
                    for b in &current {
                        let (state, net) = prepare(&b.state, *frame, *system, chi, &network).map_err(|e| at(e.into()))?;
                        net_after = Some(net);
                        next.push(Branch { state, ..b.clone() });
                    }
                    if let Some(net) = net_after {
                        network = net;
                    }
                }
                Event::Interact { p, q, spec } => {
                    for b in &current {
                        let state = apply_interaction(&b.state, *p, *q, spec).map_err(at)?;
                        next.push(Branch { state, ..b.clone() });
                    }
                }
                Event::Measure { particle } => {
                    for b in &current {
                        for m in b.state.measure_momentum(*particle).map_err(|e| at(e.into()))? {
                            let mut outcomes = b.outcomes.clone();
                            outcomes.push((*particle, m.outcome));
                            next.push(Branch {
                                outcomes,
                                probability: b.probability * m.probability,
                                state: m.collapsed,
                            });
                        }
                    }
                }
            }
            current = next;
            snapshots.push(current.clone());
        }
        Ok(Trace { snapshots, network })
    }
}

/// Knobs for [`check_individual_conservation_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Pointwise deviation allowed between conditional and expected.
    pub tolerance: f64,
    /// Branches less likely than this are not reported.
    pub min_probability: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tolerance: CHECK_TOLERANCE,
            min_probability: MIN_BRANCH_PROBABILITY,
        }
    }
}

/// Conservation verdict for one joint measurement outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRecord {
    /// Outcomes recorded after the reference point, in event order.
    pub outcome: Vec<(ParticleId, i64)>,
    pub probability: f64,
    /// Sum of the latest outcomes of measured particles in the conserving set.
    pub outcome_sum: i64,
    /// Conditional distribution of the conserving set's total minus the
    /// outcome sum: the compensating subsystem once measured labels are sharp.
    pub conditional: Distribution,
    /// Reference distribution of the conserving set's total, shifted by
    /// minus the outcome sum.
    pub expected: Distribution,
    /// Conditional distribution of the whole conserving set's total.
    pub conditional_total: Distribution,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Per-outcome individual-case conservation results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport {
    pub conserving: Vec<ParticleId>,
    pub reference_point: usize,
    pub tolerance: f64,
    pub records: Vec<OutcomeRecord>,
    pub pass: bool,
}

impl ConservationReport {
    pub fn max_deviation(&self) -> f64 {
        self.records.iter().map(|r| r.max_deviation).fold(0.0, f64::max)
    }

    pub fn record(&self, outcome: &[(ParticleId, i64)]) -> Option<&OutcomeRecord> {
        self.records.iter().find(|r| r.outcome == outcome)
    }

    /// Aligned text table, one row per (outcome, L).
    pub fn to_table(&self, name: &dyn Fn(ParticleId) -> String) -> String {
        let set: Vec<String> = self.conserving.iter().map(|&p| name(p)).collect();
        let mut rows: Vec<[String; 6]> = vec![[
            "outcome".into(),
            "prob".into(),
            "L".into(),
            "actual".into(),
            "expected".into(),
            "pass".into(),
        ]];
        for r in &self.records {
            let outcome = if r.outcome.is_empty() {
                "-".to_string()
            } else {
                r.outcome.iter().map(|(p, v)| format!("{}={}", name(*p), v)).collect::<Vec<_>>().join(",")
            };
            let values: BTreeSet<i64> = r.conditional.support().chain(r.expected.support()).collect();
            for (i, l) in values.into_iter().enumerate() {
                rows.push([
                    if i == 0 { outcome.clone() } else { String::new() },
                    if i == 0 { format!("{:.6}", r.probability) } else { String::new() },
                    l.to_string(),
                    format!("{:.6}", r.conditional.get(l)),
                    format!("{:.6}", r.expected.get(l)),
                    if i == 0 { (if r.pass { "yes" } else { "NO" }).to_string() } else { String::new() },
                ]);
            }
        }
        let mut widths = [0usize; 6];
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = format!(
            "conserving set: {}  reference point: {}  tolerance: {:e}\n",
            set.join(","),
            self.reference_point,
            self.tolerance
        );
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (cell, w))| if i < 2 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out.push_str(&format!(
            "verdict: {}  (max deviation {:.6e})\n",
            if self.pass { "PASS" } else { "FAIL" },
            self.max_deviation()
        ));
        out
    }
}

/// Individual-case conservation over `conserving`, relative to the state
/// after `reference_point` events (default: after the last preparation).
pub fn check_individual_conservation(
    pipeline: &Pipeline,
    conserving: &BTreeSet<ParticleId>,
    reference_point: Option<usize>,
) -> Result<ConservationReport, DynamicsError> {
    check_individual_conservation_with(pipeline, conserving, reference_point, &CheckOptions::default())
}

pub fn check_individual_conservation_with(
    pipeline: &Pipeline,
    conserving: &BTreeSet<ParticleId>,
    reference_point: Option<usize>,
    options: &CheckOptions,
) -> Result<ConservationReport, DynamicsError> {
    let trace = pipeline.execute()?;
    conservation_from_trace(pipeline, &trace, conserving, reference_point, options)
}

/// Same as [`check_individual_conservation_with`] on an already executed trace.
pub fn conservation_from_trace(
    pipeline: &Pipeline,
    trace: &Trace,
    conserving: &BTreeSet<ParticleId>,
    reference_point: Option<usize>,
    options: &CheckOptions,
) -> Result<ConservationReport, DynamicsError> {
    if conserving.is_empty() {
        return Err(DynamicsError::EmptyConservingSet);
    }
    let subset: Vec<ParticleId> = conserving.iter().copied().collect();
    let k = reference_point.unwrap_or_else(|| pipeline.default_reference_point());
    let len = pipeline.events.len();
    if k > len {
        return Err(DynamicsError::ReferenceOutOfRange { index: k, len });
    }
    let measured_before = pipeline.events[..k]
        .iter()
        .filter(|e| matches!(e, Event::Measure { .. }))
        .count();
    let references = &trace.snapshots[k];

    let mut records = Vec::new();
    for branch in trace.final_branches() {
        if branch.probability < options.min_probability {
            continue;
        }
        let prefix = &branch.outcomes[..measured_before];
        let reference = references
            .iter()
            .find(|r| r.outcomes == prefix)
            .expect("every final branch descends from a reference branch");
        let reference = reference.state.total_momentum_distribution(&subset)?;
        let after = &branch.outcomes[measured_before..];
        let latest: BTreeMap<ParticleId, i64> = after.iter().copied().collect();
        let outcome_sum: i64 = latest
            .iter()
            .filter(|(p, _)| conserving.contains(p))
            .map(|(_, v)| v)
            .sum();
        let conditional_total = branch.state.total_momentum_distribution(&subset)?;
        let conditional = conditional_total.shifted(-outcome_sum);
        let expected = reference.shifted(-outcome_sum);
        let max_deviation = conditional.max_deviation(&expected);
        records.push(OutcomeRecord {
            outcome: after.to_vec(),
            probability: branch.probability,
            outcome_sum,
            conditional,
            expected,
            conditional_total,
            max_deviation,
            pass: max_deviation < options.tolerance,
        });
    }
    records.sort_by(|a, b| {
        let va: Vec<i64> = a.outcome.iter().map(|o| o.1).collect();
        let vb: Vec<i64> = b.outcome.iter().map(|o| o.1).collect();
        va.cmp(&vb)
    });
    let pass = records.iter().all(|r| r.pass);
    Ok(ConservationReport {
        conserving: subset,
        reference_point: k,
        tolerance: options.tolerance,
        records,
        pass,
    })
}
