//! Frame-of-reference coordinates as integer relabelings of momentum tuples.
//!
//! A coordinate change on the circle is admissible only when the new momenta
//! are integer combinations of the old ones and vice versa, i.e. when the
//! label matrix is unimodular. Angles transform with the inverse transpose of
//! the same matrix; they are never materialized here.
//!
//! Built-in catalog (particle ordering in brackets):
//!
//! * `pair` `[F, S]`: `L1 = L_F + L_S`, `L2 = L_S`
//! * `chain` `[G, F, S]`: `L0 = L_G + L_F + L_S`, `L1 = L_F + L_S`, `L2 = L_S`
//! * `network` `[G, F, F', S, S']`: `LA` is the total, `LB` the total
//!   without `G`, `LR = L_F' + L_S'`, `LC = L_S`, `LC' = L_S'`

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use num_rational::Rational64;
use serde::Serialize;
use thiserror::Error;

use crate::statevec::{MeasurementOutcome, MomentumBasisState, ParticleId, SparseState, StateError};

/// Why a candidate matrix is not an admissible coordinate change.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformRejection {
    #[error("matrix is not square")]
    NotSquare,
    #[error("non-integer entry {value} at ({row}, {col})")]
    NonIntegerEntries { row: usize, col: usize, value: Rational64 },
    #[error("matrix is singular")]
    Singular,
    #[error("inverse has non-integer entries (determinant {determinant})")]
    NonIntegerInverse { determinant: Rational64 },
    #[error("{names} coordinate names for a {dim}x{dim} matrix")]
    NameCount { names: usize, dim: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("transform has dimension {transform} but the ordering has {ordering} particles")]
    DimensionMismatch { transform: usize, ordering: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

/// Unimodular integer matrix acting on momentum label vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelTransform {
    matrix: Vec<Vec<i64>>,
    #[serde(skip)]
    inverse: Vec<Vec<i64>>,
    names: Vec<String>,
}

fn mat_vec(m: &[Vec<i64>], v: &[i64]) -> Vec<i64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Accepts `candidate` iff every entry is an integer and the exact inverse
/// is integer as well.
pub fn validate(candidate: &[Vec<Rational64>], names: Vec<String>) -> Result<LabelTransform, TransformRejection> {
    let n = candidate.len();
    if candidate.iter().any(|row| row.len() != n) {
        return Err(TransformRejection::NotSquare);
    }
    if names.len() != n {
        return Err(TransformRejection::NameCount { names: names.len(), dim: n });
    }
    for (row, values) in candidate.iter().enumerate() {
        for (col, value) in values.iter().enumerate() {
            if !value.is_integer() {
                return Err(TransformRejection::NonIntegerEntries { row, col, value: *value });
            }
        }
    }
    let (inverse, determinant) = invert(candidate).ok_or(TransformRejection::Singular)?;
    if inverse.iter().flatten().any(|v| !v.is_integer()) {
        return Err(TransformRejection::NonIntegerInverse { determinant });
    }
    Ok(LabelTransform {
        matrix: candidate.iter().map(|r| r.iter().map(|v| v.to_integer()).collect()).collect(),
        inverse: inverse.iter().map(|r| r.iter().map(|v| v.to_integer()).collect()).collect(),
        names,
    })
}

/// Gauss-Jordan over the rationals; returns the inverse and determinant.
fn invert(m: &[Vec<Rational64>]) -> Option<(Vec<Vec<Rational64>>, Rational64)> {
    let n = m.len();
    let zero = Rational64::from_integer(0);
    let one = Rational64::from_integer(1);
    let mut a: Vec<Vec<Rational64>> = m.to_vec();
    let mut inv: Vec<Vec<Rational64>> = (0..n).map(|i| (0..n).map(|j| if i == j { one } else { zero }).collect()).collect();
    let mut det = one;
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r][col] != zero)?;
        if pivot != col {
            a.swap(pivot, col);
            inv.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col && a[r][col] != zero {
                let factor = a[r][col];
                for j in 0..n {
                    let (ac, ic) = (a[col][j], inv[col][j]);
                    a[r][j] -= factor * ac;
                    inv[r][j] -= factor * ic;
                }
            }
        }
    }
    Some((inv, det))
}

impl LabelTransform {
    /// Convenience wrapper around [`validate`] for integer input.
    pub fn from_integers(matrix: &[Vec<i64>], names: &[&str]) -> Result<Self, TransformRejection> {
        let candidate: Vec<Vec<Rational64>> = matrix
            .iter()
            .map(|r| r.iter().map(|&v| Rational64::from_integer(v)).collect())
            .collect();
        validate(&candidate, names.iter().map(|s| s.to_string()).collect())
    }

    pub fn identity(n: usize) -> Self {
        let matrix: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        Self {
            inverse: matrix.clone(),
            matrix,
            names: (0..n).map(|i| format!("L{i}")).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &[Vec<i64>] {
        &self.inverse
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `T · labels`.
    pub fn apply(&self, labels: &[i64]) -> Vec<i64> {
        mat_vec(&self.matrix, labels)
    }

    /// `T⁻¹ · labels`.
    pub fn apply_inverse(&self, labels: &[i64]) -> Vec<i64> {
        mat_vec(&self.inverse, labels)
    }

    /// The inverse transform, with its outputs named `names`.
    pub fn inverted(&self, names: Vec<String>) -> Result<Self, TransformRejection> {
        if names.len() != self.dimension() {
            return Err(TransformRejection::NameCount {
                names: names.len(),
                dim: self.dimension(),
            });
        }
        Ok(Self {
            matrix: self.inverse.clone(),
            inverse: self.matrix.clone(),
            names,
        })
    }
}

impl fmt::Display for LabelTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, row) in self.names.iter().zip(&self.matrix) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>2}")).collect();
            writeln!(f, "{name:>4} = [{}]", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Moves the amplitude of label vector `v` (particles in `ordering`) to the
/// key `T · v`. Slot `i` of the result carries coordinate `t.names()[i]`; the
/// result's register is `ordering`.
pub fn transform_state(s: &SparseState, t: &LabelTransform, ordering: &[ParticleId]) -> Result<SparseState, TransformError> {
    relabel(s, &t.matrix, ordering)
}

/// Inverse of [`transform_state`] for the same `ordering`.
pub fn untransform_state(s: &SparseState, t: &LabelTransform, ordering: &[ParticleId]) -> Result<SparseState, TransformError> {
    relabel(s, &t.inverse, ordering)
}

fn relabel(s: &SparseState, m: &[Vec<i64>], ordering: &[ParticleId]) -> Result<SparseState, TransformError> {
    if m.len() != ordering.len() {
        return Err(TransformError::DimensionMismatch {
            transform: m.len(),
            ordering: ordering.len(),
        });
    }
    let aligned = s.reorder(ordering)?;
    let amplitudes: BTreeMap<MomentumBasisState, Complex64> = aligned
        .iter()
        .map(|(k, a)| (MomentumBasisState::new(mat_vec(m, k.labels())), *a))
        .collect();
    Ok(aligned.rebuild(ordering.to_vec(), amplitudes))
}

/// Measurement of original particle `ordering[index]` carried out on a state
/// already in `t` coordinates: it is the combination given by row `index` of
/// `T⁻¹`.
pub fn measure_original_label(
    transformed: &SparseState,
    t: &LabelTransform,
    index: usize,
) -> Result<Vec<MeasurementOutcome>, TransformError> {
    let row = t.inverse.get(index).ok_or(TransformError::DimensionMismatch {
        transform: t.dimension(),
        ordering: index + 1,
    })?;
    Ok(transformed.measure_combination(row)?)
}

/// A catalog entry: the transform and the particle roles its columns expect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltinTransform {
    pub transform: LabelTransform,
    pub roles: &'static [&'static str],
}

/// The `pair`, `chain` and `network` coordinate changes.
pub fn builtin_transforms() -> BTreeMap<&'static str, BuiltinTransform> {
    let build = |m: &[Vec<i64>], names: &[&str]| LabelTransform::from_integers(m, names).expect("catalog matrices are unimodular");
    BTreeMap::from([
        (
            "pair",
            BuiltinTransform {
                transform: build(&[vec![1, 1], vec![0, 1]], &["L1", "L2"]),
                roles: &["F", "S"],
            },
        ),
        (
            "chain",
            BuiltinTransform {
                transform: build(&[vec![1, 1, 1], vec![0, 1, 1], vec![0, 0, 1]], &["L0", "L1", "L2"]),
                roles: &["G", "F", "S"],
            },
        ),
        (
            "network",
            BuiltinTransform {
                transform: build(
                    &[
                        vec![1, 1, 1, 1, 1],
                        vec![0, 1, 1, 1, 1],
                        vec![0, 0, 1, 0, 1],
                        vec![0, 0, 0, 1, 0],
                        vec![0, 0, 0, 0, 1],
                    ],
                    &["LA", "LB", "LR", "LC", "LC'"],
                ),
                roles: &["G", "F", "F'", "S", "S'"],
            },
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefun::Wavefunction;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn accepts_pair_matrix() {
        let t = validate(&[vec![r(1, 1), r(1, 1)], vec![r(0, 1), r(1, 1)]], names(2)).unwrap();
        assert_eq!(t.inverse_matrix(), &[vec![1, -1], vec![0, 1]]);
    }

    #[test]
    fn rejects_centre_of_mass_momenta() {
        let err = validate(&[vec![r(1, 1), r(1, 1)], vec![r(-1, 2), r(1, 2)]], names(2)).unwrap_err();
        assert!(matches!(err, TransformRejection::NonIntegerEntries { row: 1, col: 0, .. }));
    }

    #[test]
    fn rejects_determinant_two() {
        let err = validate(&[vec![r(1, 1), r(1, 1)], vec![r(-1, 1), r(1, 1)]], names(2)).unwrap_err();
        assert_eq!(err, TransformRejection::NonIntegerInverse { determinant: r(2, 1) });
    }

    #[test]
    fn rejects_shape_problems() {
        assert_eq!(validate(&[vec![r(1, 1), r(0, 1)]], names(1)).unwrap_err(), TransformRejection::NotSquare);
        assert_eq!(
            validate(&[vec![r(1, 1), r(1, 1)], vec![r(1, 1), r(1, 1)]], names(2)).unwrap_err(),
            TransformRejection::Singular
        );
        assert!(matches!(
            validate(&[vec![r(1, 1)]], names(2)),
            Err(TransformRejection::NameCount { names: 2, dim: 1 })
        ));
    }

    #[test]
    fn catalog_entries() {
        let cat = builtin_transforms();
        assert_eq!(cat["pair"].transform.matrix(), &[vec![1, 1], vec![0, 1]]);
        assert_eq!(cat["chain"].transform.apply(&[2, 1, 1]), vec![4, 2, 1]);
        assert_eq!(cat["network"].transform.apply(&[0; 5]), vec![0; 5]);
        assert_eq!(cat["network"].roles.len(), 5);
    }

    #[test]
    fn identity_transform_is_noop() {
        let psi = Wavefunction::normalized([(0, Complex64::new(1.0, 0.0)), (2, Complex64::new(0.0, 1.0))]).unwrap();
        let s = psi.to_state(ParticleId(3)).tensor(&psi.to_state(ParticleId(1))).unwrap();
        let ordering = s.register().to_vec();
        assert_eq!(transform_state(&s, &LabelTransform::identity(2), &ordering).unwrap(), s);
        assert!(matches!(
            transform_state(&s, &LabelTransform::identity(3), &ordering),
            Err(TransformError::DimensionMismatch { transform: 3, ordering: 2 })
        ));
    }

    #[test]
    fn pair_transform_factorizes_prepared_state() {
        let psi = Wavefunction::normalized([(0, Complex64::new(1.0, 0.0)), (1, Complex64::new(0.3, -0.2)), (-2, Complex64::new(0.1, 0.5))]).unwrap();
        let chi = Wavefunction::normalized([(1, Complex64::new(0.6, 0.0)), (-1, Complex64::new(0.0, 0.8))]).unwrap();
        let (f, s) = (ParticleId(0), ParticleId(1));
        let prepared = Wavefunction::prepared_pair_amplitudes(&psi, &chi, f, s).unwrap();
        let t = &builtin_transforms()["pair"].transform;
        let moved = transform_state(&prepared, t, &[f, s]).unwrap();
        let product = psi.to_state(f).tensor(&chi.to_state(s)).unwrap();
        assert!(moved.max_abs_diff(&product).unwrap() < 1e-15);
        assert_eq!(moved.schmidt_rank(&[f], 1e-10).unwrap(), 1);
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            labels in prop::collection::vec(prop::collection::vec(-3i64..=3, 3), 1..6),
            phases in prop::collection::vec(0.0f64..std::f64::consts::TAU, 6),
        ) {
            let ids = [ParticleId(0), ParticleId(1), ParticleId(2)];
            let amps = labels.iter().zip(&phases).map(|(l, &ph)| (l.clone(), Complex64::from_polar(1.0, ph)));
            let Ok(s) = SparseState::normalized_from(ids.to_vec(), amps) else { return Ok(()) };
            let t = &builtin_transforms()["chain"].transform;
            let there = transform_state(&s, t, &ids).unwrap();
            let back = untransform_state(&there, t, &ids).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
