use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::{EventStmt, Point, Query, Scenario, UnitaryDef, UnitaryRef, WaveLiteral};
use crate::dynamics::{
    apply_interaction, conservation_from_trace, CheckOptions, ConservationReport, DynamicsError, Event, InteractionSpec,
    OutcomeRecord, Pipeline, Trace,
};
use crate::frc::{builtin_transforms, transform_state, LabelTransform};
use crate::network::prepare;
use crate::statevec::{Distribution, ParticleId, SparseState};
use crate::wavefun::Wavefunction;
use crate::{CHECK_TOLERANCE, MIN_BRANCH_PROBABILITY};

pub const JSON_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("query {index}: {message}")]
    Query { index: usize, message: String },
    #[error("wavefunction of '{name}': {message}")]
    Wavefunction { name: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Pointwise tolerance of conservation checks.
    pub tolerance: f64,
    pub min_probability: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tolerance: CHECK_TOLERANCE,
            min_probability: MIN_BRANCH_PROBABILITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct NamedOutcome {
    pub particle: String,
    pub value: i64,
}

/// One node of the preparation network with the particles it prepared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NetworkNode {
    pub particle: String,
    pub prepared: Vec<String>,
}

/// A leaf of the outcome tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSummary {
    pub outcomes: Vec<NamedOutcome>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedOutcomeRecord {
    pub outcome: Vec<NamedOutcome>,
    pub probability: f64,
    pub outcome_sum: i64,
    pub conditional: Distribution,
    pub expected: Distribution,
    pub conditional_total: Distribution,
    pub max_deviation: f64,
    pub pass: bool,
}

/// A conservation report with particle names instead of indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedReport {
    pub conserving: Vec<String>,
    pub reference_point: usize,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub pass: bool,
    pub records: Vec<NamedOutcomeRecord>,
    #[serde(skip)]
    pub report: ConservationReport,
    #[serde(skip)]
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub labels: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

/// One branch of a state before and after a coordinate change.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformedBranch {
    pub outcomes: Vec<NamedOutcome>,
    pub probability: f64,
    pub before: Vec<Term>,
    pub after: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryOutput {
    Distribution {
        subset: Vec<String>,
        at: usize,
        given: Vec<NamedOutcome>,
        condition_probability: f64,
        distribution: Distribution,
    },
    Check(NamedReport),
    Transform {
        name: String,
        at: usize,
        /// Particle order of `before` labels.
        ordering: Vec<String>,
        /// Coordinate names of `after` labels.
        coordinates: Vec<String>,
        matrix: Vec<Vec<i64>>,
        branches: Vec<TransformedBranch>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub schema: u32,
    pub name: Option<String>,
    /// The parsed scenario, pretty-printed.
    pub scenario: String,
    pub particles: Vec<String>,
    /// Preparation network as an adjacency list.
    pub network: Vec<NetworkNode>,
    pub branches: Vec<BranchSummary>,
    pub queries: Vec<QueryOutput>,
    #[serde(skip)]
    pub trace: Trace,
    #[serde(skip)]
    pub pipeline: Pipeline,
}

impl RunResult {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }
}

/// How often one joint outcome came up in [`sample_outcomes`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleCount {
    pub outcomes: Vec<NamedOutcome>,
    pub count: usize,
}

fn wavefunction(w: &WaveLiteral, name: &str) -> Result<Wavefunction, RunError> {
    Wavefunction::new(w.entries.iter().map(|(l, a)| (*l, a.value))).map_err(|e| RunError::Wavefunction {
        name: name.to_string(),
        message: e.to_string(),
    })
}

fn spec(def: &UnitaryDef) -> InteractionSpec {
    match def {
        UnitaryDef::Identity => InteractionSpec::identity(),
        UnitaryDef::Beamsplitter => InteractionSpec::beamsplitter(),
        UnitaryDef::Swap { lo, hi } => InteractionSpec::swap(*lo..=*hi),
        UnitaryDef::Matrix(entries) => {
            InteractionSpec::from_entries(entries.iter().map(|e| (e.input, e.output, e.amplitude.value)))
        }
    }
}

/// Every unitary in the scenario, named or inline, with a label.
pub fn unitaries(sc: &Scenario) -> Vec<(String, InteractionSpec)> {
    let mut out: Vec<(String, InteractionSpec)> = sc.unitaries.iter().map(|u| (u.name.clone(), spec(&u.def))).collect();
    for (i, e) in sc.events.iter().enumerate() {
        if let EventStmt::Interact {
            p,
            q,
            unitary: UnitaryRef::Inline(def),
        } = e
        {
            out.push((format!("event {i} ({p} {q})"), spec(def)));
        }
    }
    out
}

/// Builds the pipeline a scenario describes. Particle `i` is the `i`-th
/// declaration.
pub fn build_pipeline(sc: &Scenario) -> Result<Pipeline, RunError> {
    let id = |name: &str| ParticleId(sc.particle_index(name).expect("parser checked names"));
    let mut initial: Option<SparseState> = None;
    for (i, p) in sc.particles.iter().enumerate() {
        let w = match &p.state {
            Some(w) => wavefunction(w, &p.name)?,
            None => Wavefunction::zero_momentum(),
        };
        let s = w.to_state(ParticleId(i));
        initial = Some(match initial {
            None => s,
            Some(acc) => acc.tensor(&s).map_err(DynamicsError::from)?,
        });
    }
    let initial = initial.ok_or(RunError::Query {
        index: 0,
        message: "scenario declares no particles".into(),
    })?;
    let named: BTreeMap<&str, InteractionSpec> = sc.unitaries.iter().map(|u| (u.name.as_str(), spec(&u.def))).collect();
    let mut pipeline = Pipeline::new(initial);
    for e in &sc.events {
        pipeline = match e {
            EventStmt::Prepare { frame, system, chi } => pipeline.prepare(id(frame), id(system), wavefunction(chi, system)?),
            EventStmt::Interact { p, q, unitary } => {
                let u = match unitary {
                    UnitaryRef::Named(n) => named[n.as_str()].clone(),
                    UnitaryRef::Inline(def) => spec(def),
                };
                pipeline.interact(id(p), id(q), u)
            }
            EventStmt::Measure { particle } => pipeline.measure(id(particle)),
        };
    }
    Ok(pipeline)
}

fn named(sc: &Scenario, outcomes: &[(ParticleId, i64)]) -> Vec<NamedOutcome> {
    outcomes
        .iter()
        .map(|(p, v)| NamedOutcome {
            particle: sc.particles[p.0].name.clone(),
            value: *v,
        })
        .collect()
}

fn terms(s: &SparseState) -> Vec<Term> {
    s.iter()
        .map(|(k, a)| Term {
            labels: k.labels().to_vec(),
            re: a.re,
            im: a.im,
        })
        .collect()
}

fn point(at: Point, n: usize) -> usize {
    match at {
        Point::End => n,
        Point::After(k) => k,
    }
}

pub fn run(sc: &Scenario) -> Result<RunResult, RunError> {
    run_with(sc, &RunOptions::default())
}

pub fn run_with(sc: &Scenario, options: &RunOptions) -> Result<RunResult, RunError> {
    let pipeline = build_pipeline(sc)?;
    let trace = pipeline.execute()?;
    let n = pipeline.events.len();
    let ids: Vec<ParticleId> = (0..sc.particles.len()).map(ParticleId).collect();
    let id = |name: &str| ParticleId(sc.particle_index(name).expect("parser checked names"));
    let check_options = CheckOptions {
        tolerance: options.tolerance,
        min_probability: options.min_probability,
    };

    let mut queries = Vec::with_capacity(sc.queries.len());
    for (index, q) in sc.queries.iter().enumerate() {
        let fail = |message: String| RunError::Query { index, message };
        let out = match q {
            Query::Distribution { subset, at, given } => {
                let k = point(*at, n);
                let branches = trace.branches_at(k).ok_or_else(|| fail(format!("point {k} is past the last event")))?;
                let subset_ids: Vec<ParticleId> = subset.iter().map(|s| id(s)).collect();
                let wanted: Vec<(ParticleId, i64)> = given.iter().map(|(p, v)| (id(p), *v)).collect();
                let mut mixture = Distribution::default();
                let mut weight = 0.0;
                for b in branches {
                    let latest: BTreeMap<ParticleId, i64> = b.outcomes.iter().copied().collect();
                    if wanted.iter().all(|(p, v)| latest.get(p) == Some(v)) {
                        weight += b.probability;
                        for (l, w) in b.state.total_momentum_distribution(&subset_ids).map_err(DynamicsError::from)?.iter() {
                            mixture.add(l, w * b.probability);
                        }
                    }
                }
                if weight < options.min_probability {
                    return Err(fail("the condition has probability zero".into()));
                }
                let distribution = Distribution::from_weights(mixture.iter().map(|(l, w)| (l, w / weight)));
                QueryOutput::Distribution {
                    subset: subset.clone(),
                    at: k,
                    given: given
                        .iter()
                        .map(|(p, v)| NamedOutcome {
                            particle: p.clone(),
                            value: *v,
                        })
                        .collect(),
                    condition_probability: weight,
                    distribution,
                }
            }
            Query::Check { subset, from } => {
                let set: BTreeSet<ParticleId> = subset.iter().map(|s| id(s)).collect();
                let report = conservation_from_trace(&pipeline, &trace, &set, *from, &check_options)?;
                QueryOutput::Check(named_report(sc, report))
            }
            Query::Transform { name, ordering, at } => {
                let k = point(*at, n);
                let catalog = builtin_transforms();
                let t = &catalog[name.as_str()].transform;
                let order: Vec<ParticleId> = ordering.iter().map(|s| id(s)).collect();
                let (ext, full_order) = extend(t, &order, &ids, sc);
                let branches = trace.branches_at(k).ok_or_else(|| fail(format!("point {k} is past the last event")))?;
                let mut out = Vec::with_capacity(branches.len());
                for b in branches {
                    let before = b.state.reorder(&full_order).map_err(DynamicsError::from)?;
                    let after = transform_state(&b.state, &ext, &full_order).map_err(|e| fail(e.to_string()))?;
                    out.push(TransformedBranch {
                        outcomes: named(sc, &b.outcomes),
                        probability: b.probability,
                        before: terms(&before),
                        after: terms(&after),
                    });
                }
                QueryOutput::Transform {
                    name: name.clone(),
                    at: k,
                    ordering: full_order.iter().map(|p| sc.particles[p.0].name.clone()).collect(),
                    coordinates: ext.names().to_vec(),
                    matrix: ext.matrix().to_vec(),
                    branches: out,
                }
            }
        };
        queries.push(out);
    }

    let branches = trace
        .final_branches()
        .iter()
        .map(|b| BranchSummary {
            outcomes: named(sc, &b.outcomes),
            probability: b.probability,
        })
        .collect();
    let network = sc
        .particles
        .iter()
        .enumerate()
        .map(|(i, p)| NetworkNode {
            particle: p.name.clone(),
            prepared: trace.network.children(ParticleId(i)).map(|c| sc.particles[c.0].name.clone()).collect(),
        })
        .collect();
    Ok(RunResult {
        schema: JSON_SCHEMA_VERSION,
        name: sc.name.clone(),
        scenario: sc.to_string(),
        particles: sc.particles.iter().map(|p| p.name.clone()).collect(),
        network,
        branches,
        queries,
        trace,
        pipeline,
    })
}

/// `t` on the particles of `order`, identity on every other particle (kept
/// in declaration order after them).
fn extend(t: &LabelTransform, order: &[ParticleId], all: &[ParticleId], sc: &Scenario) -> (LabelTransform, Vec<ParticleId>) {
    let rest: Vec<ParticleId> = all.iter().copied().filter(|p| !order.contains(p)).collect();
    if rest.is_empty() {
        return (t.clone(), order.to_vec());
    }
    let n = all.len();
    let d = t.dimension();
    let mut m = vec![vec![0i64; n]; n];
    for (i, row) in t.matrix().iter().enumerate() {
        m[i][..d].copy_from_slice(row);
    }
    for (i, row) in m.iter_mut().enumerate().skip(d) {
        row[i] = 1;
    }
    let mut names: Vec<String> = t.names().to_vec();
    names.extend(rest.iter().map(|p| sc.particles[p.0].name.clone()));
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let ext = LabelTransform::from_integers(&m, &names).expect("block extension of a unimodular matrix is unimodular");
    let mut full = order.to_vec();
    full.extend(rest);
    (ext, full)
}

fn named_report(sc: &Scenario, report: ConservationReport) -> NamedReport {
    let name = |p: ParticleId| sc.particles[p.0].name.clone();
    let records = report
        .records
        .iter()
        .map(|r: &OutcomeRecord| NamedOutcomeRecord {
            outcome: named(sc, &r.outcome),
            probability: r.probability,
            outcome_sum: r.outcome_sum,
            conditional: r.conditional.clone(),
            expected: r.expected.clone(),
            conditional_total: r.conditional_total.clone(),
            max_deviation: r.max_deviation,
            pass: r.pass,
        })
        .collect();
    NamedReport {
        conserving: report.conserving.iter().map(|&p| name(p)).collect(),
        reference_point: report.reference_point,
        tolerance: report.tolerance,
        max_deviation: report.max_deviation(),
        pass: report.pass,
        records,
        table: report.to_table(&name),
        report,
    }
}

/// Monte Carlo alternative to exhaustive enumeration: `shots` independent
/// runs, each following one randomly drawn outcome per measurement.
pub fn sample_outcomes(sc: &Scenario, shots: usize, seed: u64) -> Result<Vec<SampleCount>, RunError> {
    let pipeline = build_pipeline(sc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<Vec<NamedOutcome>, usize> = BTreeMap::new();
    for _ in 0..shots {
        let mut state = pipeline.initial.clone();
        let mut network = pipeline.network.clone();
        let mut outcomes = Vec::new();
        for (index, event) in pipeline.events.iter().enumerate() {
            let at = |e: DynamicsError| DynamicsError::AtEvent {
                index,
                source: Box::new(e),
            };
            match event {
                Event::Prepare { frame, system, chi } => {
                    let (s, net) = prepare(&state, *frame, *system, chi, &network).map_err(|e| at(e.into()))?;
                    state = s;
                    network = net;
                }
                Event::Interact { p, q, spec } => state = apply_interaction(&state, *p, *q, spec).map_err(at)?,
                Event::Measure { particle } => {
                    let mut options = state.measure_momentum(*particle).map_err(|e| at(e.into()))?;
                    let dist = WeightedIndex::new(options.iter().map(|m| m.probability))
                        .expect("measurement probabilities are positive");
                    let m = options.swap_remove(dist.sample(&mut rng));
                    outcomes.push((*particle, m.outcome));
                    state = m.collapsed;
                }
            }
        }
        *counts.entry(named(sc, &outcomes)).or_default() += 1;
    }
    Ok(counts.into_iter().map(|(outcomes, count)| SampleCount { outcomes, count }).collect())
}

#[cfg(test)]
pub(crate) fn term_amplitude(terms: &[Term], labels: &[i64]) -> num_complex::Complex64 {
    terms
        .iter()
        .find(|t| t.labels == labels)
        .map_or(num_complex::Complex64::default(), |t| num_complex::Complex64::new(t.re, t.im))
}
