//! Scenario files (`.qrf`): a line-oriented description of particles,
//! preparations, interactions, measurements and the questions to ask.
//!
//! ```text
//! # comment
//! scenario NAME
//! particle NAME [= WAVE]                 # default: zero momentum
//! unitary NAME = UNITARY
//! prepare FRAME SYSTEM WAVE
//! interact P Q (NAME | UNITARY)
//! measure P
//! distribution P1,P2,... [at K] [given P=v,Q=w,...]
//! check P1,P2,... [from K]
//! transform (pair|chain|network) P1,P2,... [at K]
//!
//! WAVE    := '{' [LABEL ':' AMP (',' LABEL ':' AMP)*] '}'
//! UNITARY := identity | beamsplitter | swap LO..HI
//!          | '[' (A,B) '->' (C,D) ':' AMP (';' (A,B) '->' (C,D) ':' AMP)* ']'
//! AMP     := complex literal such as 1/2, -1/sqrt2, 1/2+1/2i, sqrt3/2i,
//!            or a JSON-style pair [re, im]
//! ```
//!
//! `K` counts events: `at 0` is the initial state, `at 2` the state after the
//! first two events, and the default is the end of the pipeline. Particles
//! are numbered in declaration order. A `check` without `from` uses the point
//! right after the last preparation as its reference.

mod builtin;
mod emit;
mod literal;
mod parser;
mod runner;

use std::fmt;

use num_complex::Complex64;

pub use builtin::{builtin_scenario, builtin_scenarios, BUILTIN_NAMES};
pub use emit::{query_csv, run_text};
pub use parser::{parse, ParseError, ParseErrors};
pub use runner::{
    build_pipeline, run, run_with, unitaries, sample_outcomes, BranchSummary, NamedOutcome, NetworkNode, NamedOutcomeRecord, NamedReport,
    QueryOutput, RunError, RunOptions, RunResult, SampleCount, Term, TransformedBranch, JSON_SCHEMA_VERSION,
};

/// A complex amplitude as written in the source, with its value.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitude {
    pub text: String,
    pub value: Complex64,
}

/// Fourier coefficients as written in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveLiteral {
    pub entries: Vec<(i64, Amplitude)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleDecl {
    pub name: String,
    pub state: Option<WaveLiteral>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEntry {
    pub input: (i64, i64),
    pub output: (i64, i64),
    pub amplitude: Amplitude,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitaryDef {
    Identity,
    Beamsplitter,
    Swap { lo: i64, hi: i64 },
    Matrix(Vec<MatrixEntry>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryDecl {
    pub name: String,
    pub def: UnitaryDef,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitaryRef {
    Named(String),
    Inline(UnitaryDef),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventStmt {
    Prepare { frame: String, system: String, chi: WaveLiteral },
    Interact { p: String, q: String, unitary: UnitaryRef },
    Measure { particle: String },
}

/// Where in the pipeline a query looks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Point {
    End,
    After(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Distribution {
        subset: Vec<String>,
        at: Point,
        given: Vec<(String, i64)>,
    },
    Check {
        subset: Vec<String>,
        from: Option<usize>,
    },
    Transform {
        name: String,
        ordering: Vec<String>,
        at: Point,
    },
}

/// A parsed, name-checked scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub name: Option<String>,
    pub particles: Vec<ParticleDecl>,
    pub unitaries: Vec<UnitaryDecl>,
    pub events: Vec<EventStmt>,
    pub queries: Vec<Query>,
}

impl Scenario {
    pub fn particle_index(&self, name: &str) -> Option<usize> {
        self.particles.iter().position(|p| p.name == name)
    }

    pub fn count_events(&self, pred: impl Fn(&EventStmt) -> bool) -> usize {
        self.events.iter().filter(|e| pred(e)).count()
    }
}

impl fmt::Display for WaveLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (l, a)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}: {}", a.text)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for UnitaryDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitaryDef::Identity => write!(f, "identity"),
            UnitaryDef::Beamsplitter => write!(f, "beamsplitter"),
            UnitaryDef::Swap { lo, hi } => write!(f, "swap {lo}..{hi}"),
            UnitaryDef::Matrix(entries) => {
                write!(f, "[")?;
                for (i, e) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(
                        f,
                        "({},{})->({},{}): {}",
                        e.input.0, e.input.1, e.output.0, e.output.1, e.amplitude.text
                    )?;
                }
                write!(f, "]")
            }
        }
    }
}

fn write_point(f: &mut fmt::Formatter<'_>, at: Point) -> fmt::Result {
    match at {
        Point::End => Ok(()),
        Point::After(k) => write!(f, " at {k}"),
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(name) = &self.name {
            writeln!(f, "scenario {name}")?;
        }
        for p in &self.particles {
            match &p.state {
                Some(w) => writeln!(f, "particle {} = {w}", p.name)?,
                None => writeln!(f, "particle {}", p.name)?,
            }
        }
        for u in &self.unitaries {
            writeln!(f, "unitary {} = {}", u.name, u.def)?;
        }
        for e in &self.events {
            match e {
                EventStmt::Prepare { frame, system, chi } => writeln!(f, "prepare {frame} {system} {chi}")?,
                EventStmt::Interact { p, q, unitary } => match unitary {
                    UnitaryRef::Named(n) => writeln!(f, "interact {p} {q} {n}")?,
                    UnitaryRef::Inline(def) => writeln!(f, "interact {p} {q} {def}")?,
                },
                EventStmt::Measure { particle } => writeln!(f, "measure {particle}")?,
            }
        }
        for q in &self.queries {
            match q {
                Query::Distribution { subset, at, given } => {
                    write!(f, "distribution {}", subset.join(","))?;
                    write_point(f, *at)?;
                    if !given.is_empty() {
                        let g: Vec<String> = given.iter().map(|(p, v)| format!("{p}={v}")).collect();
                        write!(f, " given {}", g.join(","))?;
                    }
                    writeln!(f)?;
                }
                Query::Check { subset, from } => {
                    write!(f, "check {}", subset.join(","))?;
                    if let Some(k) = from {
                        write!(f, " from {k}")?;
                    }
                    writeln!(f)?;
                }
                Query::Transform { name, ordering, at } => {
                    write!(f, "transform {name} {}", ordering.join(","))?;
                    write_point(f, *at)?;
                    writeln!(f)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::runner::term_amplitude;
    use super::*;
    use crate::statevec::Distribution;

    fn bundled(name: &str) -> Scenario {
        parse(builtin_scenario(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn distribution(result: &RunResult, i: usize) -> &Distribution {
        match &result.queries[i] {
            QueryOutput::Distribution { distribution, .. } => distribution,
            other => panic!("query {i} is {other:?}"),
        }
    }

    #[test]
    fn bundled_scenarios_print_to_a_fixpoint() {
        for (name, src) in builtin_scenarios() {
            let once = parse(src).unwrap_or_else(|e| panic!("{name}: {e}"));
            let printed = once.to_string();
            let twice = parse(&printed).unwrap();
            assert_eq!(once, twice, "{name}");
            assert_eq!(printed, twice.to_string(), "{name}");
        }
        assert_eq!(builtin_scenarios().map(|(n, _)| n).collect::<Vec<_>>(), BUILTIN_NAMES);
    }

    #[test]
    fn paradox_structure() {
        let sc = bundled("paradox");
        assert_eq!(sc.particles.len(), 4);
        assert_eq!(sc.count_events(|e| matches!(e, EventStmt::Prepare { .. })), 2);
        assert_eq!(sc.count_events(|e| matches!(e, EventStmt::Interact { .. })), 1);
        assert_eq!(sc.count_events(|e| matches!(e, EventStmt::Measure { .. })), 2);
        assert_eq!(sc.queries.len(), 2);
    }

    #[test]
    fn paradox_distributions() {
        let r = run(&bundled("paradox")).unwrap();
        let before = distribution(&r, 0);
        assert!(before.max_deviation(&Distribution::from_weights([(0, 0.25), (1, 0.5), (2, 0.25)])) < 1e-12);
        let after = distribution(&r, 1);
        let third = 1.0 / 3.0;
        assert!(after.max_deviation(&Distribution::from_weights([(-1, third), (0, third), (1, third)])) < 1e-12);
        match &r.queries[1] {
            QueryOutput::Distribution { condition_probability, .. } => assert!((condition_probability - 3.0 / 16.0).abs() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn branch_probabilities_sum_to_one() {
        for name in BUILTIN_NAMES {
            let r = run(&bundled(name)).unwrap();
            assert!((r.total_probability() - 1.0).abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn json_is_deterministic() {
        for name in BUILTIN_NAMES {
            let a = serde_json::to_string(&run(&bundled(name)).unwrap()).unwrap();
            let b = serde_json::to_string(&run(&bundled(name)).unwrap()).unwrap();
            assert_eq!(a, b, "{name}");
            let v: serde_json::Value = serde_json::from_str(&a).unwrap();
            assert_eq!(v["schema"], 1);
        }
    }

    #[test]
    fn network_adjacency_in_json() {
        let v = serde_json::to_value(run(&bundled("great_grand")).unwrap()).unwrap();
        assert_eq!(
            v["network"],
            serde_json::json!([
                {"particle": "H", "prepared": ["G"]},
                {"particle": "G", "prepared": ["F", "F2"]},
                {"particle": "F", "prepared": ["S"]},
                {"particle": "F2", "prepared": ["S2"]},
                {"particle": "S", "prepared": []},
                {"particle": "S2", "prepared": []},
            ])
        );
    }

    #[test]
    fn chain_check_passes_and_g_is_untouched() {
        let r = run(&bundled("chain")).unwrap();
        match &r.queries[0] {
            QueryOutput::Check(report) => assert!(report.pass, "{}", report.table),
            other => panic!("{other:?}"),
        }
        assert!(distribution(&r, 1).max_deviation(distribution(&r, 2)) < 1e-12);
    }

    #[test]
    fn network_checks() {
        let r = run(&bundled("network_with_G")).unwrap();
        let verdicts: Vec<bool> = r
            .queries
            .iter()
            .filter_map(|q| match q {
                QueryOutput::Check(rep) => Some(rep.pass),
                _ => None,
            })
            .collect();
        assert_eq!(verdicts, vec![true, false]);
        let r = run(&bundled("network_no_interact")).unwrap();
        assert!(r.queries.iter().all(|q| !matches!(q, QueryOutput::Check(rep) if !rep.pass)));
    }

    #[test]
    fn network_transform_isolates_the_total() {
        let r = run(&bundled("network_with_G")).unwrap();
        let QueryOutput::Transform { branches, coordinates, .. } = &r.queries[4] else {
            panic!("expected a transform")
        };
        assert_eq!(coordinates, &["LA", "LB", "LR", "LC", "LC'"]);
        assert_eq!(branches.len(), 1);
        assert!(branches[0].after.iter().all(|t| t.labels[0] == 0));
        assert!((term_amplitude(&branches[0].after, &[0, 1, 0, 0, 0]).re - 0.25).abs() < 1e-12);
        assert_eq!(branches[0].after.len(), 16);
    }

    #[test]
    fn great_grand_transform_keeps_h_last() {
        let r = run(&bundled("great_grand")).unwrap();
        let QueryOutput::Transform { ordering, coordinates, .. } = &r.queries[4] else {
            panic!("expected a transform")
        };
        assert_eq!(ordering.last().unwrap(), "H");
        assert_eq!(coordinates.last().unwrap(), "H");
    }

    #[test]
    fn sampling_is_seeded() {
        let sc = bundled("paradox");
        let a = sample_outcomes(&sc, 2000, 7).unwrap();
        assert_eq!(a, sample_outcomes(&sc, 2000, 7).unwrap());
        assert_eq!(a.iter().map(|c| c.count).sum::<usize>(), 2000);
        let r = run(&sc).unwrap();
        for c in &a {
            let p = r.branches.iter().find(|b| b.outcomes == c.outcomes).unwrap().probability;
            assert!((c.count as f64 / 2000.0 - p).abs() < 0.05);
        }
    }

    #[test]
    fn csv_schemas() {
        let r = run(&bundled("network_with_G")).unwrap();
        let dist = query_csv(&r, Some(0)).unwrap();
        assert!(dist.starts_with("L,probability\n"));
        let total: f64 = dist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(query_csv(&r, Some(2)).unwrap().starts_with("outcome,L,probability,expected,pass\n"));
        assert!(query_csv(&r, None).unwrap().starts_with("outcome,probability\n"));
        assert!(run_text(&r).contains("verdict: PASS"));
    }

    #[test]
    fn runtime_errors_carry_the_event() {
        let src = "particle A\nparticle B\ninteract A B [(0,0)->(0,1): 1]\n";
        let err = run(&parse(src).unwrap()).unwrap_err();
        assert!(err.to_string().starts_with("event 0:"), "{err}");
        let src = "particle A\nparticle B = {1: 1}\nprepare A B {0: 1}\n";
        let err = run(&parse(src).unwrap()).unwrap_err();
        assert!(err.to_string().starts_with("event 0:"), "{err}");
    }
}
