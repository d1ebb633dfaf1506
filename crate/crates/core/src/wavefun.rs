//! Band-limited single-particle wavefunctions on the circle.
//!
//! Wavefunctions are stored by their Fourier coefficients; the angle-space
//! form is only ever evaluated, never stored.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::statevec::{Distribution, MomentumBasisState, ParticleId, SparseState, StateError, NORM_TOLERANCE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WavefunctionError {
    #[error("wavefunction has no nonzero coefficients")]
    Empty,
    #[error("wavefunction is not normalized (norm squared {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
}

/// Finite Fourier series `ψ(θ) = Σ_l c(l) e^{ilθ} / √(2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    coeffs: BTreeMap<i64, Complex64>,
}

impl Wavefunction {
    /// Takes coefficients that must already have unit norm (within 1e-12).
    /// Zero coefficients are dropped.
    pub fn new(coeffs: impl IntoIterator<Item = (i64, Complex64)>) -> Result<Self, WavefunctionError> {
        let w = Self::collect(coeffs)?;
        let norm_sqr = w.norm_sqr();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(WavefunctionError::NotNormalized { norm_sqr });
        }
        Ok(w)
    }

    /// Rescales arbitrary nonzero coefficients to unit norm.
    pub fn normalized(coeffs: impl IntoIterator<Item = (i64, Complex64)>) -> Result<Self, WavefunctionError> {
        let w = Self::collect(coeffs)?;
        let scale = 1.0 / w.norm_sqr().sqrt();
        Ok(Self {
            coeffs: w.coeffs.into_iter().map(|(l, c)| (l, c * scale)).collect(),
        })
    }

    fn collect(coeffs: impl IntoIterator<Item = (i64, Complex64)>) -> Result<Self, WavefunctionError> {
        let mut map: BTreeMap<i64, Complex64> = BTreeMap::new();
        for (l, c) in coeffs {
            *map.entry(l).or_default() += c;
        }
        map.retain(|_, c| c.norm_sqr() > 0.0);
        if map.is_empty() {
            return Err(WavefunctionError::Empty);
        }
        Ok(Self { coeffs: map })
    }

    /// The zero angular-momentum state, uniform around the circle.
    pub fn zero_momentum() -> Self {
        Self::eigenstate(0)
    }

    pub fn eigenstate(l: i64) -> Self {
        Self {
            coeffs: BTreeMap::from([(l, Complex64::new(1.0, 0.0))]),
        }
    }

    pub fn coeff(&self, l: i64) -> Complex64 {
        self.coeffs.get(&l).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().map(|(&l, &c)| (l, c))
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    /// Momentum statistics `|c(l)|²`.
    pub fn distribution(&self) -> Distribution {
        Distribution::from_weights(self.iter().map(|(l, c)| (l, c.norm_sqr())))
    }

    /// Largest `|l|` in the support.
    pub fn band_limit(&self) -> i64 {
        self.coeffs.keys().map(|l| l.abs()).max().unwrap_or(0)
    }

    /// `ψ(θ)`. The series is 2π-periodic, so any real `theta` is accepted.
    pub fn evaluate_angle(&self, theta: f64) -> Complex64 {
        let norm = 1.0 / (2.0 * PI).sqrt();
        self.iter()
            .map(|(l, c)| c * Complex64::from_polar(norm, l as f64 * theta))
            .sum()
    }

    /// Lowers the support by `l`: `c'(k) = c(k + l)`.
    pub fn shift(&self, l: i64) -> Wavefunction {
        Self {
            coeffs: self.coeffs.iter().map(|(&k, &c)| (k - l, c)).collect(),
        }
    }

    /// One-particle state of `p`.
    pub fn to_state(&self, p: ParticleId) -> SparseState {
        SparseState::from_parts(
            vec![p],
            self.iter().map(|(l, c)| (MomentumBasisState::new(vec![l]), c)).collect(),
            crate::statevec::DEFAULT_PRUNE_THRESHOLD,
        )
    }

    /// Momentum-basis amplitudes of the prepared pair `ψ(θ_f) χ(θ_s − θ_f)`:
    /// the amplitude on `(l_f, l_s)` is `ψ̃(l_f + l_s) χ̃(l_s)`.
    pub fn prepared_pair_amplitudes(
        psi: &Wavefunction,
        chi: &Wavefunction,
        frame: ParticleId,
        system: ParticleId,
    ) -> Result<SparseState, StateError> {
        let terms = psi.iter().flat_map(|(total, a)| {
            chi.iter()
                .map(move |(ls, b)| (vec![total - ls, ls], a * b))
        });
        SparseState::from_amplitudes(vec![frame, system], terms)
    }
}

impl Serialize for Wavefunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<i64, [f64; 2]> = self.iter().map(|(l, c)| (l, [c.re, c.im])).collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Wavefunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<i64, [f64; 2]>::deserialize(deserializer)?;
        Wavefunction::new(map.into_iter().map(|(l, [re, im])| (l, Complex64::new(re, im)))).map_err(D::Error::custom)
    }
}
