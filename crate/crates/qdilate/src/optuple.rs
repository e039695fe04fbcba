//! The operator-tuple data model: validation of q-commutation, class
//! detection, the Brehmer operator S(u), and deterministic generators for
//! test families.

use crate::linalg::{c, cr, hermitize, identity, matrix_power, min_eig_hermitian, op_norm, CMat};
use crate::qword::{pair_count, pairs, QSpec, QwordError, Turn, UnitComplex};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TupleError {
    #[error("matrix {index} is {rows}x{cols}, expected square of dimension {dim}")]
    ShapeMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        dim: usize,
    },
    #[error("no matrices given")]
    Empty,
    #[error("phase data is for k = {q_k}, tuple has k = {k}")]
    PhaseMismatch { q_k: usize, k: usize },
    #[error("negative tolerance {0}")]
    NegativeTolerance(f64),
    #[error("subset check over {k} generators needs 2^{k} subsets; refusing k > {max}")]
    TooManyGenerators { k: usize, max: usize },
    #[error("generator index {index} out of range 0..{k}")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("scale modulus {0} exceeds 1")]
    ScaleTooLarge(f64),
    #[error("clock-shift dimension must be >= 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("cannot generate a tuple with d = {d}, k = {k}")]
    UnsatisfiableRequest { d: usize, k: usize },
    #[error(transparent)]
    Word(#[from] QwordError),
}

type Result<T> = std::result::Result<T, TupleError>;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_EIG_TOL: f64 = 1e-8;
const MAX_SUBSET_K: usize = 20;

/// A tuple (T_1, ..., T_k) of complex d x d matrices together with the
/// phase data q and the validation tolerance.
///
/// Construction only checks shapes; whether the matrices really are
/// q-commuting contractions is reported by [`OperatorTuple::validate`].
#[derive(Debug, Clone)]
pub struct OperatorTuple {
    mats: Vec<CMat>,
    q: QSpec,
    tol: f64,
}

impl OperatorTuple {
    pub fn new(mats: Vec<CMat>, q: QSpec, tol: f64) -> Result<OperatorTuple> {
        if mats.is_empty() {
            return Err(TupleError::Empty);
        }
        if tol < 0.0 {
            return Err(TupleError::NegativeTolerance(tol));
        }
        let dim = mats[0].nrows();
        for (index, m) in mats.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(TupleError::ShapeMismatch {
                    index,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    dim,
                });
            }
        }
        if q.k() != mats.len() {
            return Err(TupleError::PhaseMismatch {
                q_k: q.k(),
                k: mats.len(),
            });
        }
        Ok(OperatorTuple { mats, q, tol })
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn k(&self) -> usize {
        self.mats.len()
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    pub fn mat(&self, i: usize) -> &CMat {
        &self.mats[i]
    }

    pub fn q(&self) -> &QSpec {
        &self.q
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// The adjoint family (T_i^*) with the same phases; q-commuting whenever
    /// the original tuple is.
    pub fn adjoint_tuple(&self) -> OperatorTuple {
        OperatorTuple {
            mats: self.mats.iter().map(|m| m.adjoint()).collect(),
            q: self.q.clone(),
            tol: self.tol,
        }
    }

    /// Contraction-norm excess and q-commutation residual per pair.
    pub fn validate(&self) -> ValidationReport {
        let norms: Vec<f64> = self.mats.iter().map(op_norm).collect();
        let max_norm_excess = norms.iter().fold(0.0f64, |a, &n| a.max(n - 1.0));
        let mut pair_residuals = Vec::new();
        for (i, j) in pairs(self.k()) {
            let qij = self.q.phase(i, j).value();
            let lhs = &self.mats[i] * &self.mats[j];
            let rhs = (&self.mats[j] * &self.mats[i]).map(|z| z * qij);
            pair_residuals.push(PairResidual {
                i: i + 1,
                j: j + 1,
                residual: op_norm(&(lhs - rhs)),
            });
        }
        let max_pair_residual = pair_residuals
            .iter()
            .fold(0.0f64, |a, p| a.max(p.residual));
        ValidationReport {
            pass: max_norm_excess <= self.tol && max_pair_residual <= self.tol,
            tol: self.tol,
            norms,
            max_norm_excess,
            pair_residuals,
            max_pair_residual,
        }
    }

    /// Class flags per the dilation trichotomy: isometric, doubly
    /// q-commuting, norm-sum, and normal family.
    pub fn classify(&self) -> TupleClass {
        let tol = self.tol;
        let id = identity(self.dim());
        let is_isometric = self
            .mats
            .iter()
            .all(|t| op_norm(&(t.adjoint() * t - &id)) <= tol);
        let mut is_doubly = true;
        for (i, j) in pairs(self.k()) {
            let qbar = self.q.phase(i, j).inverse().value();
            let lhs = &self.mats[i] * self.mats[j].adjoint();
            let rhs = (self.mats[j].adjoint() * &self.mats[i]).map(|z| z * qbar);
            if op_norm(&(lhs - rhs)) > tol {
                is_doubly = false;
                break;
            }
        }
        let norm_sum: f64 = self.mats.iter().map(|t| op_norm(t).powi(2)).sum();
        let is_normal_family = self
            .mats
            .iter()
            .all(|t| op_norm(&(t * t.adjoint() - t.adjoint() * t)) <= tol);
        TupleClass {
            is_isometric,
            is_doubly_q_commuting: is_doubly,
            norm_sum_ok: norm_sum <= 1.0 + tol,
            is_normal_family,
        }
    }

    /// Ordered product `T^{e(v)} = prod_{i in v, ascending} T_i`.
    pub fn ordered_product(&self, v: &[usize]) -> Result<CMat> {
        let mut sorted = v.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut out = identity(self.dim());
        for &i in &sorted {
            if i >= self.k() {
                return Err(TupleError::IndexOutOfRange {
                    index: i,
                    k: self.k(),
                });
            }
            out = &out * &self.mats[i];
        }
        Ok(out)
    }

    /// Brehmer operator `S(u) = sum_{v subset u} (-1)^{|v|} (T^{e(v)})^* T^{e(v)}`,
    /// symmetrized after summation.
    pub fn brehmer_operator(&self, u: &[usize]) -> Result<CMat> {
        let mut base = u.to_vec();
        base.sort_unstable();
        base.dedup();
        let mut sum = CMat::zeros(self.dim(), self.dim());
        for mask in 0u32..(1u32 << base.len()) {
            let v: Vec<usize> = base
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &i)| i)
                .collect();
            let p = self.ordered_product(&v)?;
            let term = p.adjoint() * &p;
            if mask.count_ones() % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        Ok(hermitize(&sum))
    }

    /// Minimum eigenvalue of S(u) for every subset u; passes iff all are
    /// >= -eig_tol.
    pub fn brehmer_check(&self, eig_tol: f64) -> Result<BrehmerReport> {
        let k = self.k();
        if k > MAX_SUBSET_K {
            return Err(TupleError::TooManyGenerators {
                k,
                max: MAX_SUBSET_K,
            });
        }
        let margins: Vec<SubsetMargin> = (0u32..(1u32 << k))
            .into_par_iter()
            .map(|mask| {
                let u: Vec<usize> = (0..k).filter(|&i| mask >> i & 1 == 1).collect();
                let s = self.brehmer_operator(&u).expect("indices in range");
                let min_eig = min_eig_hermitian(&s);
                SubsetMargin {
                    subset: u.iter().map(|&i| i + 1).collect(),
                    min_eig,
                }
            })
            .collect();
        let min_margin = margins.iter().fold(f64::INFINITY, |a, m| a.min(m.min_eig));
        Ok(BrehmerReport {
            pass: min_margin >= -eig_tol,
            eig_tol,
            min_margin,
            margins,
        })
    }

    /// The defect-operator product `prod_{w in u, ascending} (I - T_w^* T_w)`,
    /// which equals S(u) for doubly q-commuting tuples. The doubly
    /// precondition is the caller's duty; it is not checked here.
    pub fn brehmer_product_form(&self, u: &[usize]) -> Result<CMat> {
        let mut sorted = u.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let id = identity(self.dim());
        let mut out = id.clone();
        for &i in &sorted {
            if i >= self.k() {
                return Err(TupleError::IndexOutOfRange {
                    index: i,
                    k: self.k(),
                });
            }
            out = &out * (&id - self.mats[i].adjoint() * &self.mats[i]);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairResidual {
    pub i: usize,
    pub j: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub tol: f64,
    pub norms: Vec<f64>,
    pub max_norm_excess: f64,
    pub pair_residuals: Vec<PairResidual>,
    pub max_pair_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TupleClass {
    pub is_isometric: bool,
    pub is_doubly_q_commuting: bool,
    pub norm_sum_ok: bool,
    pub is_normal_family: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetMargin {
    /// 1-based generator indices.
    pub subset: Vec<usize>,
    pub min_eig: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BrehmerReport {
    pub pass: bool,
    pub eig_tol: f64,
    pub min_margin: f64,
    pub margins: Vec<SubsetMargin>,
}

/// Which structured family [`generate_random`] should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TupleClassSelector {
    Isometric,
    DoublyQCommuting,
    NormSum,
}

/// The cyclic shift X (X e_j = e_{j+1 mod r}) and the clock Z = diag(w^j)
/// on dimension r, scaled by (a, b). The pair satisfies X Z = w^{-1} Z X,
/// so the stored phase is q_{12} = w^{-1} = turn (r-1)/r.
pub fn generate_clock_shift(r: usize, scale: (Complex64, Complex64)) -> Result<OperatorTuple> {
    if r < 2 {
        return Err(TupleError::DimensionTooSmall(r));
    }
    let (a, b) = scale;
    for s in [a, b] {
        if s.norm() > 1.0 + 1e-15 {
            return Err(TupleError::ScaleTooLarge(s.norm()));
        }
    }
    let mut x = CMat::zeros(r, r);
    for j in 0..r {
        x[((j + 1) % r, j)] = cr(1.0);
    }
    let mut z = CMat::zeros(r, r);
    for j in 0..r {
        z[(j, j)] = Turn::new(j as i64, r as i64).expect("r >= 2").value();
    }
    let q = QSpec::new(
        2,
        vec![UnitComplex::turn(r as i64 - 1, r as i64).expect("r >= 2")],
    )?;
    OperatorTuple::new(vec![x.map(|v| v * a), z.map(|v| v * b)], q, DEFAULT_TOL)
}

/// Deterministic structured q-commuting tuples: Weyl monomials
/// `c_i X^{a_i} Z^{b_i}` on dimension d, conjugated by a seeded random
/// unitary and scaled per the requested class. Generic random matrices
/// cannot q-commute, so only these structured constructions are offered;
/// the phases come out as exact rational turns `q_{ij} = w^{b_i a_j - a_i b_j}`
/// with `w = exp(2 pi i / d)`.
pub fn generate_random(
    class: TupleClassSelector,
    d: usize,
    k: usize,
    seed: u64,
) -> Result<OperatorTuple> {
    if d == 0 || k == 0 {
        return Err(TupleError::UnsatisfiableRequest { d, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = d as i64;

    // Weyl pair on dimension d (identity matrices when d = 1).
    let mut x = CMat::zeros(d, d);
    let mut z = CMat::zeros(d, d);
    for j in 0..d {
        x[((j + 1) % d, j)] = cr(1.0);
        z[(j, j)] = Turn::new(j as i64, r).expect("d >= 1").value();
    }

    let exps: Vec<(i64, i64)> = (0..k)
        .map(|_| (rng.random_range(0..d as i64), rng.random_range(0..d as i64)))
        .collect();

    let mut phases = Vec::with_capacity(pair_count(k));
    for (i, j) in pairs(k) {
        let (ai, bi) = exps[i];
        let (aj, bj) = exps[j];
        phases.push(UnitComplex::turn(bi * aj - ai * bj, r)?);
    }
    let q = QSpec::new(k, phases)?;

    let conj = random_unitary(d, &mut rng);
    let scales: Vec<f64> = match class {
        TupleClassSelector::Isometric => vec![1.0; k],
        TupleClassSelector::DoublyQCommuting => {
            (0..k).map(|_| rng.random_range(0.3..=1.0)).collect()
        }
        TupleClassSelector::NormSum => {
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..=1.0)).collect();
            let total: f64 = raw.iter().map(|s| s * s).sum();
            let shrink = rng.random_range(0.5..=1.0) / total.sqrt();
            raw.iter().map(|s| s * shrink).collect()
        }
    };

    let mats: Vec<CMat> = exps
        .iter()
        .zip(&scales)
        .map(|(&(a, b), &s)| {
            let scalar_phase = Turn::new(rng.random_range(0..24), 24).expect("den 24").value();
            let mono = matrix_power(&x, a as u64) * matrix_power(&z, b as u64);
            let scaled = mono.map(|v| v * scalar_phase * s);
            conj.adjoint() * scaled * &conj
        })
        .collect();

    OperatorTuple::new(mats, q, DEFAULT_TOL)
}

/// Seeded Haar-ish unitary via the polar factor of a random complex matrix.
fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> CMat {
    let m = CMat::from_fn(d, d, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    // Polar factor through the Gram eigendecomposition; the random matrix is
    // almost surely well-conditioned enough for this use.
    let gram = m.adjoint() * &m;
    let (vals, vecs) = crate::linalg::hermitian_eigen_desc(&gram);
    let d = gram.nrows();
    let mut inv_sqrt = CMat::zeros(d, d);
    for (i, &l) in vals.iter().enumerate() {
        let col = vecs.column(i);
        let f = cr(1.0 / l.max(1e-300).sqrt());
        inv_sqrt += (col * col.adjoint()).map(|v| v * f);
    }
    m * inv_sqrt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::op_norm;

    fn nilpotent_pair() -> OperatorTuple {
        let t = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.0), cr(0.0)]);
        OperatorTuple::new(vec![t.clone(), t], QSpec::commutative(2), DEFAULT_TOL).unwrap()
    }

    #[test]
    fn clock_shift_pair_validates_with_zero_residual() {
        let t = generate_clock_shift(3, (cr(1.0), cr(1.0))).unwrap();
        let report = t.validate();
        assert!(report.pass, "{report:?}");
        assert!(report.max_pair_residual < 1e-12);
        assert!(report.max_norm_excess < 1e-12);
    }

    #[test]
    fn self_commuting_pair_validates() {
        let t = nilpotent_pair();
        assert!(t.validate().pass);
    }

    #[test]
    fn identity_pair_with_minus_one_phase_fails_validation() {
        let id = identity(2);
        let q = QSpec::new(2, vec![UnitComplex::turn(1, 2).unwrap()]).unwrap();
        let t = OperatorTuple::new(vec![id.clone(), id], q, DEFAULT_TOL).unwrap();
        let report = t.validate();
        assert!(!report.pass);
        assert!((report.max_pair_residual - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_clock_shift_classifies_doubly_and_norm_sum() {
        let t = generate_clock_shift(4, (cr(0.6), cr(0.8))).unwrap();
        let class = t.classify();
        assert!(class.is_doubly_q_commuting);
        assert!(class.norm_sum_ok); // 0.36 + 0.64 = 1
        assert!(!class.is_isometric);
    }

    #[test]
    fn unitary_clock_shift_is_isometric_and_normal() {
        let t = generate_clock_shift(2, (cr(1.0), cr(1.0))).unwrap();
        let class = t.classify();
        assert!(class.is_isometric);
        assert!(class.is_normal_family);
        // Fuglede-type implication observed on this family.
        assert!(class.is_doubly_q_commuting);
    }

    #[test]
    fn nilpotent_pair_is_not_doubly() {
        let class = nilpotent_pair().classify();
        assert!(!class.is_doubly_q_commuting);
        assert!(!class.is_normal_family);
    }

    #[test]
    fn brehmer_operator_empty_subset_is_identity() {
        let t = nilpotent_pair();
        let s = t.brehmer_operator(&[]).unwrap();
        assert!(op_norm(&(s - identity(2))) == 0.0);
    }

    #[test]
    fn brehmer_operator_of_nilpotent_pair_is_diag_one_minus_one() {
        let t = nilpotent_pair();
        let s = t.brehmer_operator(&[0, 1]).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)]);
        assert!(op_norm(&(s - expect)) < 1e-14);
    }

    #[test]
    fn brehmer_operator_of_isometric_tuple_is_parity_sum() {
        let t = generate_clock_shift(3, (cr(1.0), cr(1.0))).unwrap();
        // |u| >= 1 gives 0, u empty gives I.
        let s = t.brehmer_operator(&[0, 1]).unwrap();
        assert!(op_norm(&s) < 1e-12);
        let s1 = t.brehmer_operator(&[1]).unwrap();
        assert!(op_norm(&s1) < 1e-12);
    }

    #[test]
    fn brehmer_check_reports_margins() {
        let pass = generate_clock_shift(3, (cr(0.7), cr(0.5))).unwrap();
        let report = pass.brehmer_check(DEFAULT_EIG_TOL).unwrap();
        assert!(report.pass);

        let fail = nilpotent_pair().brehmer_check(DEFAULT_EIG_TOL).unwrap();
        assert!(!fail.pass);
        assert!((fail.min_margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_sum_tuples_pass_brehmer() {
        for seed in 0..5 {
            let t = generate_random(TupleClassSelector::NormSum, 3, 3, seed).unwrap();
            let sum: f64 = t.mats().iter().map(|m| op_norm(m).powi(2)).sum();
            assert!(sum <= 1.0 + 1e-12, "seed {seed}: sum {sum}");
            assert!(t.brehmer_check(DEFAULT_EIG_TOL).unwrap().pass);
        }
    }

    #[test]
    fn product_form_matches_brehmer_operator_on_doubly_tuples() {
        for seed in 0..8 {
            let t = generate_random(TupleClassSelector::DoublyQCommuting, 4, 2, seed).unwrap();
            assert!(t.validate().pass, "seed {seed}");
            assert!(t.classify().is_doubly_q_commuting, "seed {seed}");
            for mask in 0u32..4 {
                let u: Vec<usize> = (0..2).filter(|&i| mask >> i & 1 == 1).collect();
                let s = t.brehmer_operator(&u).unwrap();
                let p = t.brehmer_product_form(&u).unwrap();
                assert!(op_norm(&(s - p)) <= 1e-10, "seed {seed} mask {mask}");
            }
        }
    }

    #[test]
    fn product_form_trivia() {
        let t = generate_clock_shift(3, (cr(1.0), cr(1.0))).unwrap();
        assert!(op_norm(&(t.brehmer_product_form(&[]).unwrap() - identity(3))) == 0.0);
        // unitary: I - U*U = 0
        assert!(op_norm(&t.brehmer_product_form(&[0, 1]).unwrap()) < 1e-12);
    }

    #[test]
    fn generate_random_is_deterministic_and_valid() {
        let a = generate_random(TupleClassSelector::Isometric, 4, 2, 7).unwrap();
        let b = generate_random(TupleClassSelector::Isometric, 4, 2, 7).unwrap();
        for (x, y) in a.mats().iter().zip(b.mats()) {
            assert_eq!(x, y);
        }
        assert!(a.validate().pass);
        assert!(a.classify().is_isometric);
    }

    #[test]
    fn adjoint_family_still_q_commutes() {
        for seed in [1, 9] {
            let t = generate_random(TupleClassSelector::DoublyQCommuting, 3, 3, seed).unwrap();
            assert!(t.adjoint_tuple().validate().pass, "seed {seed}");
        }
    }

    #[test]
    fn clock_shift_rejects_bad_input() {
        assert!(matches!(
            generate_clock_shift(1, (cr(1.0), cr(1.0))),
            Err(TupleError::DimensionTooSmall(1))
        ));
        assert!(matches!(
            generate_clock_shift(2, (cr(1.5), cr(1.0))),
            Err(TupleError::ScaleTooLarge(_))
        ));
        // zero scale is a valid degenerate tuple
        let t = generate_clock_shift(3, (cr(0.0), cr(1.0))).unwrap();
        assert!(t.validate().pass);
    }
}
