//! Independent reference implementations and random generators for the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use qrfnet::{InteractionSpec, ParticleId, Pipeline, SparseState, Wavefunction};
use rand::Rng;
use rustfft::FftPlanner;

pub type C = Complex64;
pub type Coeffs = Vec<(i64, C)>;
pub type Pair = (i64, i64);
pub type Entry = (Pair, Pair, C);
/// `(outcomes, probability, state)` of one dense branch.
pub type DenseBranch = (Vec<(usize, i64)>, f64, Dense);

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Dense amplitude vector over `n` particles with labels in `[-w, w]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub n: usize,
    pub w: i64,
    pub amps: Vec<C>,
}

impl Dense {
    fn side(&self) -> usize {
        (2 * self.w + 1) as usize
    }

    pub fn zeros(n: usize, w: i64) -> Self {
        let side = (2 * w + 1) as usize;
        Self {
            n,
            w,
            amps: vec![C::default(); side.pow(n as u32)],
        }
    }

    pub fn index(&self, labels: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for &l in labels {
            if l.abs() > self.w {
                return None;
            }
            idx = idx * self.side() + (l + self.w) as usize;
        }
        Some(idx)
    }

    pub fn labels(&self, mut idx: usize) -> Vec<i64> {
        let mut out = vec![0; self.n];
        for slot in (0..self.n).rev() {
            out[slot] = (idx % self.side()) as i64 - self.w;
            idx /= self.side();
        }
        out
    }

    /// Kronecker product of single-particle coefficient lists.
    pub fn product(w: i64, states: &[Coeffs]) -> Self {
        let mut d = Dense::zeros(1, w);
        d.amps = vec![C::default(); d.side()];
        for &(l, a) in &states[0] {
            let i = d.index(&[l]).expect("label inside window");
            d.amps[i] = a;
        }
        for s in &states[1..] {
            let mut single = Dense::zeros(1, w);
            for &(l, a) in s {
                let i = single.index(&[l]).expect("label inside window");
                single.amps[i] = a;
            }
            d = d.kron(&single);
        }
        d
    }

    pub fn kron(&self, other: &Dense) -> Dense {
        assert_eq!(self.w, other.w);
        let mut out = Dense::zeros(self.n + other.n, self.w);
        for (i, a) in self.amps.iter().enumerate() {
            for (j, b) in other.amps.iter().enumerate() {
                out.amps[i * other.amps.len() + j] = a * b;
            }
        }
        out
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|.., l_f, .., 0, ..> -> sum_l chi(l) |.., l_f - l, .., l, ..>`.
    pub fn prepare(&self, frame: usize, system: usize, chi: &[(i64, C)]) -> Dense {
        let mut out = Dense::zeros(self.n, self.w);
        for (idx, a) in self.amps.iter().enumerate() {
            if a.norm() == 0.0 {
                continue;
            }
            let labels = self.labels(idx);
            assert_eq!(labels[system], 0, "system must start at zero momentum");
            for &(l, x) in chi {
                let mut moved = labels.clone();
                moved[frame] -= l;
                moved[system] = l;
                let j = out.index(&moved).expect("window too small for preparation");
                out.amps[j] += a * x;
            }
        }
        out
    }

    /// Applies `<out|U|in>` entries on slots `(p, q)`; pairs that appear as
    /// no entry's input pass through unchanged.
    pub fn interact(&self, p: usize, q: usize, entries: &[Entry]) -> Dense {
        let mut columns: BTreeMap<Pair, Vec<(Pair, C)>> = BTreeMap::new();
        for &(input, output, amp) in entries {
            columns.entry(input).or_default().push((output, amp));
        }
        let mut out = Dense::zeros(self.n, self.w);
        for (idx, a) in self.amps.iter().enumerate() {
            if a.norm() == 0.0 {
                continue;
            }
            let labels = self.labels(idx);
            match columns.get(&(labels[p], labels[q])) {
                None => out.amps[idx] += a,
                Some(col) => {
                    for &((x, y), u) in col {
                        let mut moved = labels.clone();
                        moved[p] = x;
                        moved[q] = y;
                        let j = out.index(&moved).expect("window too small for interaction");
                        out.amps[j] += a * u;
                    }
                }
            }
        }
        out
    }

    /// `(outcome, probability, renormalized state)` for every outcome with
    /// probability above `1e-14`, ascending.
    pub fn measure(&self, p: usize) -> Vec<(i64, f64, Dense)> {
        let mut probs: BTreeMap<i64, f64> = BTreeMap::new();
        for (idx, a) in self.amps.iter().enumerate() {
            *probs.entry(self.labels(idx)[p]).or_default() += a.norm_sqr();
        }
        probs
            .into_iter()
            .filter(|(_, pr)| *pr > 1e-14)
            .map(|(l, pr)| {
                let mut d = Dense::zeros(self.n, self.w);
                for (idx, a) in self.amps.iter().enumerate() {
                    if self.labels(idx)[p] == l {
                        d.amps[idx] = a / pr.sqrt();
                    }
                }
                (l, pr, d)
            })
            .collect()
    }

    /// Largest amplitude difference against a sparse state whose register
    /// is `ParticleId(0..n)` in order. Keys outside the window count fully.
    pub fn max_diff(&self, s: &SparseState) -> f64 {
        assert_eq!(s.register(), (0..self.n).map(ParticleId).collect::<Vec<_>>().as_slice());
        let mut worst: f64 = 0.0;
        for (k, a) in s.iter() {
            match self.index(k.labels()) {
                Some(i) => worst = worst.max((self.amps[i] - a).norm()),
                None => worst = worst.max(a.norm()),
            }
        }
        for (idx, a) in self.amps.iter().enumerate() {
            worst = worst.max((s.amplitude(&self.labels(idx)) - a).norm());
        }
        worst
    }
}

pub fn random_complex<R: Rng>(rng: &mut R) -> C {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Normalized random coefficients on a random nonempty subset of `lo..=hi`
/// with at most `max_terms` entries.
pub fn random_coeffs<R: Rng>(rng: &mut R, lo: i64, hi: i64, max_terms: usize) -> Coeffs {
    let labels: Vec<i64> = (lo..=hi).collect();
    let k = rng.gen_range(1..=max_terms.min(labels.len()));
    let mut chosen = rand::seq::index::sample(rng, labels.len(), k).into_vec();
    chosen.sort_unstable();
    let raw: Coeffs = chosen
        .into_iter()
        .map(|i| {
            let mut a = random_complex(rng);
            while a.norm() < 0.1 {
                a = random_complex(rng);
            }
            (labels[i], a)
        })
        .collect();
    let norm: f64 = raw.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|(l, a)| (l, a / norm)).collect()
}

pub fn wavefunction(coeffs: &Coeffs) -> Wavefunction {
    Wavefunction::new(coeffs.iter().copied()).expect("random coefficients are normalized")
}

/// Haar-ish random unitary by Gram-Schmidt on a random complex matrix;
/// `u[row][col]`.
pub fn random_unitary<R: Rng>(rng: &mut R, k: usize) -> Vec<Vec<C>> {
    let mut cols: Vec<Vec<C>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v: Vec<C> = (0..k).map(|_| random_complex(rng)).collect();
        for u in &cols {
            let proj: C = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    (0..k).map(|r| (0..k).map(|col| cols[col][r]).collect()).collect()
}

/// Random momentum-conserving interaction, one random unitary block per
/// total momentum, covering every pair with labels in `[-w, w]`.
pub fn random_block_entries<R: Rng>(rng: &mut R, w: i64) -> Vec<Entry> {
    let mut blocks: BTreeMap<i64, Vec<(i64, i64)>> = BTreeMap::new();
    for a in -w..=w {
        for b in -w..=w {
            blocks.entry(a + b).or_default().push((a, b));
        }
    }
    let mut out = Vec::new();
    for basis in blocks.values() {
        let u = random_unitary(rng, basis.len());
        for (col, &input) in basis.iter().enumerate() {
            for (row, &output) in basis.iter().enumerate() {
                out.push((input, output, u[row][col]));
            }
        }
    }
    out
}

pub fn spec(entries: &[Entry]) -> InteractionSpec {
    InteractionSpec::from_entries(entries.iter().copied())
}

/// One event in a form both the engine and the dense oracle understand.
#[derive(Debug, Clone)]
pub enum Step {
    Prepare { frame: usize, system: usize, chi: Coeffs },
    Interact { p: usize, q: usize, entries: Vec<Entry> },
    Measure { p: usize },
}

#[derive(Debug, Clone)]
pub struct RandomScenario {
    pub initial: Vec<Coeffs>,
    pub steps: Vec<Step>,
}

impl RandomScenario {
    /// `parents[i] = Some(j)` makes `j` prepare `i` (which starts at zero
    /// momentum); roots get random states on `[-2, 2]`. Preparations come
    /// first, then `extra` random interactions and measurements.
    pub fn generate<R: Rng>(rng: &mut R, parents: &[Option<usize>], extra: usize, interaction_window: i64) -> Self {
        let mut initial = Vec::new();
        let mut steps = Vec::new();
        for (i, parent) in parents.iter().enumerate() {
            match parent {
                None => initial.push(random_coeffs(rng, -2, 2, 5)),
                Some(j) => {
                    assert!(*j < i);
                    initial.push(vec![(0, c(1.0, 0.0))]);
                    steps.push(Step::Prepare {
                        frame: *j,
                        system: i,
                        chi: random_coeffs(rng, -1, 1, 3),
                    });
                }
            }
        }
        let n = parents.len();
        for _ in 0..extra {
            if n >= 2 && rng.gen_bool(0.6) {
                let p = rng.gen_range(0..n);
                let mut q = rng.gen_range(0..n - 1);
                if q >= p {
                    q += 1;
                }
                steps.push(Step::Interact {
                    p,
                    q,
                    entries: random_block_entries(rng, interaction_window),
                });
            } else {
                steps.push(Step::Measure { p: rng.gen_range(0..n) });
            }
        }
        Self { initial, steps }
    }

    /// Random preparation forest over `n` particles.
    pub fn random_parents<R: Rng>(rng: &mut R, n: usize) -> Vec<Option<usize>> {
        (0..n)
            .map(|i| if i == 0 || rng.gen_bool(0.35) { None } else { Some(rng.gen_range(0..i)) })
            .collect()
    }

    pub fn pipeline(&self) -> Pipeline {
        let mut initial = wavefunction(&self.initial[0]).to_state(ParticleId(0));
        for (i, coeffs) in self.initial.iter().enumerate().skip(1) {
            initial = initial.tensor(&wavefunction(coeffs).to_state(ParticleId(i))).unwrap();
        }
        let mut p = Pipeline::new(initial);
        for s in &self.steps {
            p = match s {
                Step::Prepare { frame, system, chi } => p.prepare(ParticleId(*frame), ParticleId(*system), wavefunction(chi)),
                Step::Interact { p: a, q, entries } => p.interact(ParticleId(*a), ParticleId(*q), spec(entries)),
                Step::Measure { p: a } => p.measure(ParticleId(*a)),
            };
        }
        p
    }

    /// Every snapshot of the dense simulation: for each point, the branches
    /// as `(outcomes, probability, state)`.
    pub fn dense_trace(&self, w: i64) -> Vec<Vec<DenseBranch>> {
        let mut current = vec![(Vec::new(), 1.0, Dense::product(w, &self.initial))];
        let mut out = vec![current.clone()];
        for s in &self.steps {
            let mut next = Vec::new();
            for (outcomes, prob, d) in current {
                match s {
                    Step::Prepare { frame, system, chi } => next.push((outcomes, prob, d.prepare(*frame, *system, chi))),
                    Step::Interact { p, q, entries } => next.push((outcomes, prob, d.interact(*p, *q, entries))),
                    Step::Measure { p } => {
                        for (l, pr, collapsed) in d.measure(*p) {
                            let mut o = outcomes.clone();
                            o.push((*p, l));
                            next.push((o, prob * pr, collapsed));
                        }
                    }
                }
            }
            current = next;
            out.push(current.clone());
        }
        out
    }
}

/// `sum_l c(l) e^{i l theta} / sqrt(2 pi)`, computed here from scratch.
pub fn angle_value(coeffs: &Coeffs, theta: f64) -> C {
    coeffs
        .iter()
        .map(|&(l, a)| a * C::from_polar(1.0, l as f64 * theta))
        .sum::<C>()
        / (2.0 * PI).sqrt()
}

/// Momentum amplitudes of `psi(theta_f) chi(theta_s - theta_f)` from a 2-D
/// FFT of its samples on an `n x n` grid: entry `(l_f, l_s)` for labels in
/// `[-n/2, n/2)`.
pub fn grid_dft(psi: &Coeffs, chi: &Coeffs, n: usize) -> impl Fn(i64, i64) -> C {
    let step = 2.0 * PI / n as f64;
    let psi_at: Vec<C> = (0..n).map(|j| angle_value(psi, j as f64 * step)).collect();
    let chi_at: Vec<C> = (0..n).map(|m| angle_value(chi, m as f64 * step)).collect();
    let mut grid: Vec<C> = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            // theta_s - theta_f on the grid, wrapped onto [0, 2pi).
            grid.push(psi_at[j] * chi_at[(k + n - j) % n]);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    for row in grid.chunks_mut(n) {
        fft.process(row);
    }
    let mut column = vec![C::default(); n];
    for k in 0..n {
        for j in 0..n {
            column[j] = grid[j * n + k];
        }
        fft.process(&mut column);
        for j in 0..n {
            grid[j * n + k] = column[j];
        }
    }
    // Riemann sum of (1/2pi) * double integral: (2pi/n)^2 / (2pi).
    let scale = 2.0 * PI / (n * n) as f64;
    move |lf: i64, ls: i64| {
        let j = lf.rem_euclid(n as i64) as usize;
        let k = ls.rem_euclid(n as i64) as usize;
        grid[j * n + k] * scale
    }
}

/// Full-register total-momentum distribution of one state, summed directly
/// from its amplitudes.
pub fn full_total(s: &SparseState) -> BTreeMap<i64, f64> {
    let mut out = BTreeMap::new();
    for (k, a) in s.iter() {
        *out.entry(k.labels().iter().sum::<i64>()).or_insert(0.0) += a.norm_sqr();
    }
    out
}

pub fn map_deviation(a: &BTreeMap<i64, f64>, b: &BTreeMap<i64, f64>) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}
