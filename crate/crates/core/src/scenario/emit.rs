use std::fmt::Write as _;

use super::runner::{NamedOutcome, QueryOutput, RunResult, Term};

fn outcome_key(outcomes: &[NamedOutcome]) -> String {
    outcomes
        .iter()
        .map(|o| format!("{}={}", o.particle, o.value))
        .collect::<Vec<_>>()
        .join(";")
}

fn labels(t: &Term) -> String {
    t.labels.iter().map(i64::to_string).collect::<Vec<_>>().join(";")
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// CSV for query `index`, or for the outcome tree when `index` is `None`.
///
/// Distributions: `L,probability`. Reports: `outcome,L,probability,expected,pass`.
/// Transforms: `outcome,labels,re,im` with labels in the new coordinates.
/// Outcome tree: `outcome,probability`.
pub fn query_csv(result: &RunResult, index: Option<usize>) -> Result<String, csv::Error> {
    let Some(index) = index else {
        let mut rows = vec![vec!["outcome".to_string(), "probability".to_string()]];
        for b in &result.branches {
            rows.push(vec![outcome_key(&b.outcomes), b.probability.to_string()]);
        }
        return csv_string(rows);
    };
    let mut rows = Vec::new();
    match &result.queries[index] {
        QueryOutput::Distribution { distribution, .. } => {
            rows.push(vec!["L".to_string(), "probability".to_string()]);
            for (l, p) in distribution.iter() {
                rows.push(vec![l.to_string(), p.to_string()]);
            }
        }
        QueryOutput::Check(report) => {
            rows.push(["outcome", "L", "probability", "expected", "pass"].map(String::from).to_vec());
            for r in &report.records {
                let mut values: Vec<i64> = r.conditional.support().chain(r.expected.support()).collect();
                values.sort_unstable();
                values.dedup();
                for l in values {
                    rows.push(vec![
                        outcome_key(&r.outcome),
                        l.to_string(),
                        r.conditional.get(l).to_string(),
                        r.expected.get(l).to_string(),
                        r.pass.to_string(),
                    ]);
                }
            }
        }
        QueryOutput::Transform { branches, .. } => {
            rows.push(["outcome", "labels", "re", "im"].map(String::from).to_vec());
            for b in branches {
                for t in &b.after {
                    rows.push(vec![outcome_key(&b.outcomes), labels(t), t.re.to_string(), t.im.to_string()]);
                }
            }
        }
    }
    csv_string(rows)
}

fn fmt_terms(out: &mut String, terms: &[Term]) {
    for t in terms {
        let _ = writeln!(out, "      |{}>  {:+.6}{:+.6}i", labels(t).replace(';', ","), t.re, t.im);
    }
}

/// Human-readable summary of a run.
pub fn run_text(result: &RunResult) -> String {
    let mut out = String::new();
    if let Some(name) = &result.name {
        let _ = writeln!(out, "scenario {name}");
    }
    let _ = writeln!(out, "particles: {}", result.particles.join(", "));
    let _ = writeln!(out, "branches: {}", result.branches.len());
    for b in &result.branches {
        let key = if b.outcomes.is_empty() { "-".to_string() } else { outcome_key(&b.outcomes) };
        let _ = writeln!(out, "  {key:<24} {:.6}", b.probability);
    }
    for (i, q) in result.queries.iter().enumerate() {
        let _ = writeln!(out);
        match q {
            QueryOutput::Distribution {
                subset,
                at,
                given,
                condition_probability,
                distribution,
            } => {
                let _ = write!(out, "[{i}] distribution of total over {} at {at}", subset.join(","));
                if !given.is_empty() {
                    let _ = write!(out, " given {} (probability {:.6})", outcome_key(given).replace(';', ","), condition_probability);
                }
                let _ = writeln!(out);
                for (l, p) in distribution.iter() {
                    let _ = writeln!(out, "  L={l:<4} {p:.6}");
                }
            }
            QueryOutput::Check(report) => {
                let _ = writeln!(out, "[{i}] conservation check");
                out.push_str(&report.table);
            }
            QueryOutput::Transform {
                name,
                at,
                ordering,
                coordinates,
                branches,
                ..
            } => {
                let _ = writeln!(out, "[{i}] transform {name} at {at}: ({}) -> ({})", ordering.join(","), coordinates.join(","));
                for b in branches {
                    let key = if b.outcomes.is_empty() { "-".to_string() } else { outcome_key(&b.outcomes) };
                    let _ = writeln!(out, "  branch {key} (probability {:.6})", b.probability);
                    let _ = writeln!(out, "    before:");
                    fmt_terms(&mut out, &b.before);
                    let _ = writeln!(out, "    after:");
                    fmt_terms(&mut out, &b.after);
                }
            }
        }
    }
    out
}
