//! Reciprocal transforms on finitely supported functions, the D(p, r)
//! operator, its off-diagonal vanishing, and the diagonal collapse to
//! Brehmer sums.
//!
//! Exponents here live on the full lattice over `Omega = {(i,j) : i < j}
//! union {1..k}`: the subset machinery (`pi(p)`, `e(v)`) genuinely ranges
//! over the phase coordinates too, unlike the phase-free windows used for
//! Gram matrices.

use crate::kernel::{KernelContext, KernelError, Window};
use crate::linalg::{hermitize, CMat, CVec};
use crate::qword::{pair_count, pairs, GroupElement, QwordError, UnitComplex};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("exponent is negative where the nonnegative lattice is required")]
    NegativeExponent,
    #[error("value dimension {got} does not match tuple dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("generator count {got} does not match tuple k = {want}")]
    GeneratorMismatch { got: usize, want: usize },
    #[error("subset enumeration over {0} coordinates is too large")]
    SubsetBlowup(usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Word(#[from] QwordError),
}

type Result<T> = std::result::Result<T, TransformError>;

const MAX_SUBSET_COORDS: usize = 24;

/// Exponent vector over the full index set Omega: the phase pairs (in the
/// lexicographic pair order) followed by the word coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FullExponent {
    phase: Vec<i64>,
    word: Vec<i64>,
}

impl FullExponent {
    pub fn zero(k: usize) -> FullExponent {
        FullExponent {
            phase: vec![0; pair_count(k)],
            word: vec![0; k],
        }
    }

    pub fn new(phase: Vec<i64>, word: Vec<i64>) -> Result<FullExponent> {
        if phase.len() != pair_count(word.len()) {
            return Err(TransformError::Word(QwordError::PhaseCount {
                got: phase.len(),
                expected: pair_count(word.len()),
                k: word.len(),
            }));
        }
        Ok(FullExponent { phase, word })
    }

    pub fn word_only(word: Vec<i64>) -> FullExponent {
        FullExponent {
            phase: vec![0; pair_count(word.len())],
            word,
        }
    }

    pub fn k(&self) -> usize {
        self.word.len()
    }

    pub fn omega_len(&self) -> usize {
        self.phase.len() + self.word.len()
    }

    pub fn phase(&self) -> &[i64] {
        &self.phase
    }

    pub fn word(&self) -> &[i64] {
        &self.word
    }

    fn get(&self, omega: usize) -> i64 {
        if omega < self.phase.len() {
            self.phase[omega]
        } else {
            self.word[omega - self.phase.len()]
        }
    }

    fn set(&mut self, omega: usize, v: i64) {
        if omega < self.phase.len() {
            self.phase[omega] = v;
        } else {
            self.word[omega - self.phase.len()] = v;
        }
    }

    pub fn is_nonneg(&self) -> bool {
        self.phase.iter().chain(self.word.iter()).all(|&x| x >= 0)
    }

    pub fn geq(&self, other: &FullExponent) -> bool {
        self.phase
            .iter()
            .zip(&other.phase)
            .chain(self.word.iter().zip(&other.word))
            .all(|(&a, &b)| a >= b)
    }

    pub fn add(&self, other: &FullExponent) -> FullExponent {
        FullExponent {
            phase: self
                .phase
                .iter()
                .zip(&other.phase)
                .map(|(&a, &b)| a + b)
                .collect(),
            word: self
                .word
                .iter()
                .zip(&other.word)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &FullExponent) -> FullExponent {
        FullExponent {
            phase: self
                .phase
                .iter()
                .zip(&other.phase)
                .map(|(&a, &b)| a - b)
                .collect(),
            word: self
                .word
                .iter()
                .zip(&other.word)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    /// `pi(p)`: Omega indices with strictly positive entry.
    pub fn support(&self) -> Vec<usize> {
        (0..self.omega_len()).filter(|&w| self.get(w) > 0).collect()
    }

    /// `e(v)` for a set of Omega indices.
    pub fn indicator(v: &[usize], k: usize) -> FullExponent {
        let mut out = FullExponent::zero(k);
        for &w in v {
            out.set(w, 1);
        }
        out
    }

    pub fn to_group_element(&self) -> GroupElement {
        GroupElement::from_exponents(self.phase.clone(), self.word.clone())
            .expect("consistent lengths")
    }
}

/// Finitely supported function on the nonnegative exponent lattice with
/// values in C^d.
#[derive(Debug, Clone)]
pub struct FiniteSupportFunction {
    k: usize,
    dim: usize,
    entries: BTreeMap<FullExponent, CVec>,
}

impl FiniteSupportFunction {
    pub fn new(k: usize, dim: usize) -> FiniteSupportFunction {
        FiniteSupportFunction {
            k,
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert(&mut self, at: FullExponent, value: CVec) -> Result<()> {
        if at.k() != self.k {
            return Err(TransformError::GeneratorMismatch {
                got: at.k(),
                want: self.k,
            });
        }
        if value.len() != self.dim {
            return Err(TransformError::DimensionMismatch {
                got: value.len(),
                want: self.dim,
            });
        }
        if !at.is_nonneg() {
            return Err(TransformError::NegativeExponent);
        }
        self.entries.insert(at, value);
        Ok(())
    }

    pub fn get(&self, at: &FullExponent) -> Option<&CVec> {
        self.entries.get(at)
    }

    pub fn support(&self) -> impl Iterator<Item = (&FullExponent, &CVec)> {
        self.entries.iter()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Componentwise upper bounds of the support box.
    fn bounds(&self) -> Option<FullExponent> {
        let mut it = self.entries.keys();
        let first = it.next()?.clone();
        Some(it.fold(first, |mut acc, e| {
            for w in 0..acc.omega_len() {
                acc.set(w, acc.get(w).max(e.get(w)));
            }
            acc
        }))
    }

    /// l2 distance over the union of supports.
    pub fn distance(&self, other: &FiniteSupportFunction) -> f64 {
        let zero = CVec::zeros(self.dim);
        let mut sum = 0.0f64;
        for key in self.entries.keys().chain(other.entries.keys()) {
            let a = self.entries.get(key).unwrap_or(&zero);
            let b = other.entries.get(key).unwrap_or(&zero);
            sum += (a - b).norm_squared();
        }
        // Union iteration visits shared keys twice; the duplicate terms are
        // identical, so halve the double-counted total.
        let shared: f64 = self
            .entries
            .iter()
            .filter_map(|(k, a)| other.entries.get(k).map(|b| (a - b).norm_squared()))
            .sum();
        (sum - shared).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .values()
            .map(|v| v.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Random function with entries uniform in the complex unit box,
    /// supported on the whole nonnegative box below `bounds`.
    pub fn random(bounds: &FullExponent, dim: usize, rng: &mut ChaCha8Rng) -> FiniteSupportFunction {
        let mut out = FiniteSupportFunction::new(bounds.k(), dim);
        for at in nonneg_box(bounds) {
            let v = CVec::from_fn(dim, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            out.entries.insert(at, v);
        }
        out
    }
}

/// Enumerate the box `0 <= x <= bounds` in lexicographic order.
fn nonneg_box(bounds: &FullExponent) -> Vec<FullExponent> {
    let total = bounds.omega_len();
    let mut out = Vec::new();
    let mut cur = FullExponent::zero(bounds.k());
    fn rec(
        bounds: &FullExponent,
        cur: &mut FullExponent,
        depth: usize,
        total: usize,
        out: &mut Vec<FullExponent>,
    ) {
        if depth == total {
            out.push(cur.clone());
            return;
        }
        for v in 0..=bounds.get(depth) {
            cur.set(depth, v);
            rec(bounds, cur, depth + 1, total, out);
        }
    }
    rec(bounds, &mut cur, 0, total, &mut out);
    out
}

/// `prod_{i<j} q_{ij}^{(m_i - n_i) n_j}` over the word coordinates.
fn transform_phase(
    ctx: &KernelContext,
    m: &FullExponent,
    n: &FullExponent,
) -> Result<UnitComplex> {
    let q = ctx.tuple().q();
    let mut acc = UnitComplex::one();
    for (i, j) in pairs(ctx.k()) {
        let e = (m.word()[i] - n.word()[i])
            .checked_mul(n.word()[j])
            .ok_or(QwordError::ExponentOverflow)?;
        if e != 0 {
            acc = acc.mul(&q.phase_pow(i, j, e)?)?;
        }
    }
    Ok(acc)
}

fn check_function(ctx: &KernelContext, f: &FiniteSupportFunction) -> Result<()> {
    if f.k() != ctx.k() {
        return Err(TransformError::GeneratorMismatch {
            got: f.k(),
            want: ctx.k(),
        });
    }
    if f.dim() != ctx.dim() {
        return Err(TransformError::DimensionMismatch {
            got: f.dim(),
            want: ctx.dim(),
        });
    }
    Ok(())
}

/// `g(x^n) = sum_{m >= n} prod q_{ij}^{(m_i-n_i) n_j} T(x^{m-n}) h(x^m)`.
pub fn forward_transform(
    ctx: &KernelContext,
    h: &FiniteSupportFunction,
) -> Result<FiniteSupportFunction> {
    check_function(ctx, h)?;
    let mut out = FiniteSupportFunction::new(h.k(), h.dim());
    let Some(bounds) = h.bounds() else {
        return Ok(out);
    };
    for n in nonneg_box(&bounds) {
        let mut acc = CVec::zeros(h.dim());
        let mut touched = false;
        for (m, value) in h.support() {
            if !m.geq(&n) {
                continue;
            }
            touched = true;
            let phase = transform_phase(ctx, m, &n)?;
            let t = ctx.eval(&m.sub(&n).to_group_element())?;
            acc += (t * value).map(|z| z * phase.value());
        }
        if touched {
            out.entries.insert(n, acc);
        }
    }
    Ok(out)
}

/// `h(x^n) = sum_{v subset Omega} (-1)^{|v|} prod q_{ij}^{e_i(v) n_j}
/// T(x^{e(v)}) g(x^{n+e(v)})`.
pub fn inverse_transform(
    ctx: &KernelContext,
    g: &FiniteSupportFunction,
) -> Result<FiniteSupportFunction> {
    check_function(ctx, g)?;
    let mut out = FiniteSupportFunction::new(g.k(), g.dim());
    let Some(bounds) = g.bounds() else {
        return Ok(out);
    };
    let omega = bounds.omega_len();
    if omega > MAX_SUBSET_COORDS {
        return Err(TransformError::SubsetBlowup(omega));
    }
    // T(x^{e(v)}) depends only on v; precompute per subset.
    let all: Vec<usize> = (0..omega).collect();
    let subsets: Vec<(FullExponent, CMat, i32)> = (0u64..(1u64 << omega))
        .map(|mask| {
            let v: Vec<usize> = all.iter().copied().filter(|&w| mask >> w & 1 == 1).collect();
            let ev = FullExponent::indicator(&v, g.k());
            let t = ctx.eval(&ev.to_group_element())?;
            let sign = if v.len() % 2 == 0 { 1 } else { -1 };
            Ok((ev, t, sign))
        })
        .collect::<Result<_>>()?;
    for n in nonneg_box(&bounds) {
        let mut acc = CVec::zeros(g.dim());
        let mut touched = false;
        for (ev, t, sign) in &subsets {
            let at = n.add(ev);
            let Some(value) = g.get(&at) else { continue };
            touched = true;
            let phase = transform_phase(ctx, &ev.add(&n), &n)?;
            let term = (t * value).map(|z| z * phase.value() * (*sign as f64));
            acc += term;
        }
        if touched {
            out.entries.insert(n, acc);
        }
    }
    Ok(out)
}

/// `sum_{v subset v0} (-1)^{|v|}`: 1 on the empty set, 0 otherwise.
pub fn alternating_subset_sum(v0: &[usize]) -> i64 {
    if v0.is_empty() {
        1
    } else {
        0
    }
}

/// The literal double sum
///
/// ```text
/// D(p,r) = sum_{v subset pi(p), w subset pi(r)} (-1)^{|v|+|w|}
///          prod q_{ij}^{(p_i-e_i(v)-r_i)(r_j-e_j(w)) + (p_j-e_j(v)) e_i(v)}
///          T(x^{e(w)})^* T(x^{p-e(v)-r+e(w)}) T(x^{e(v)})
/// ```
pub fn d_operator(ctx: &KernelContext, p: &FullExponent, r: &FullExponent) -> Result<CMat> {
    if !p.is_nonneg() || !r.is_nonneg() {
        return Err(TransformError::NegativeExponent);
    }
    if p.k() != ctx.k() || r.k() != ctx.k() {
        return Err(TransformError::GeneratorMismatch {
            got: p.k().max(r.k()),
            want: ctx.k(),
        });
    }
    let q = ctx.tuple().q();
    let pi_p = p.support();
    let pi_r = r.support();
    if pi_p.len() + pi_r.len() > MAX_SUBSET_COORDS {
        return Err(TransformError::SubsetBlowup(pi_p.len() + pi_r.len()));
    }
    let k = ctx.k();
    let d = ctx.dim();
    let mut sum = CMat::zeros(d, d);
    for vmask in 0u64..(1u64 << pi_p.len()) {
        let v: Vec<usize> = pi_p
            .iter()
            .enumerate()
            .filter(|(b, _)| vmask >> b & 1 == 1)
            .map(|(_, &w)| w)
            .collect();
        let ev = FullExponent::indicator(&v, k);
        let tv = ctx.eval(&ev.to_group_element())?;
        for wmask in 0u64..(1u64 << pi_r.len()) {
            let w: Vec<usize> = pi_r
                .iter()
                .enumerate()
                .filter(|(b, _)| wmask >> b & 1 == 1)
                .map(|(_, &idx)| idx)
                .collect();
            let ew = FullExponent::indicator(&w, k);
            let tw = ctx.eval(&ew.to_group_element())?;
            let arg = p.sub(&ev).sub(r).add(&ew);
            let middle = ctx.eval(&arg.to_group_element())?;
            let mut phase = UnitComplex::one();
            for (i, j) in pairs(k) {
                let e1 = (p.word()[i] - ev.word()[i] - r.word()[i])
                    .checked_mul(r.word()[j] - ew.word()[j])
                    .ok_or(QwordError::ExponentOverflow)?;
                let e2 = (p.word()[j] - ev.word()[j])
                    .checked_mul(ev.word()[i])
                    .ok_or(QwordError::ExponentOverflow)?;
                let e = e1.checked_add(e2).ok_or(QwordError::ExponentOverflow)?;
                if e != 0 {
                    phase = phase.mul(&q.phase_pow(i, j, e)?)?;
                }
            }
            let sign = if (v.len() + w.len()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            let scalar = phase.value() * sign;
            sum += (tw.adjoint() * &middle * &tv).map(|z| z * scalar);
        }
    }
    Ok(sum)
}

/// The collapsed diagonal `sum_{u subset pi(p)} (-1)^{|u|} T(x^{e(u)})^* T(x^{e(u)})`.
pub fn diagonal_collapse_reference(ctx: &KernelContext, p: &FullExponent) -> Result<CMat> {
    if !p.is_nonneg() {
        return Err(TransformError::NegativeExponent);
    }
    let pi_p = p.support();
    if pi_p.len() > MAX_SUBSET_COORDS {
        return Err(TransformError::SubsetBlowup(pi_p.len()));
    }
    let d = ctx.dim();
    let mut sum = CMat::zeros(d, d);
    for mask in 0u64..(1u64 << pi_p.len()) {
        let u: Vec<usize> = pi_p
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &w)| w)
            .collect();
        let eu = FullExponent::indicator(&u, p.k());
        let t = ctx.eval(&eu.to_group_element())?;
        let term = t.adjoint() * &t;
        if u.len() % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(sum)
}

fn inner(x: &CVec, y: &CVec) -> Complex64 {
    // <x, y> with conjugation on the second argument.
    y.dotc(x)
}

/// Quadratic form `sum_{p,r} <D(p,r) g(p), g(r)>`.
pub fn d_form_value(ctx: &KernelContext, g: &FiniteSupportFunction) -> Result<Complex64> {
    check_function(ctx, g)?;
    let mut total = Complex64::new(0.0, 0.0);
    for (p, gp) in g.support() {
        for (r, gr) in g.support() {
            let d = d_operator(ctx, p, r)?;
            total += inner(&(&d * gp), gr);
        }
    }
    Ok(total)
}

/// Quadratic form `sum_{m,n} <prod q_{ij}^{(m_i-n_i) n_j} T(x^{m-n}) h(m), h(n)>`.
pub fn moment_form_value(ctx: &KernelContext, h: &FiniteSupportFunction) -> Result<Complex64> {
    check_function(ctx, h)?;
    let mut total = Complex64::new(0.0, 0.0);
    for (m, hm) in h.support() {
        for (n, hn) in h.support() {
            let phase = transform_phase(ctx, m, n)?;
            let t = ctx.eval(&m.sub(n).to_group_element())?;
            total += inner(&(t * hm).map(|z| z * phase.value()), hn);
        }
    }
    Ok(total)
}

/// The Hermitian block matrix of the moment form over the given exponents.
pub fn moment_form_matrix(ctx: &KernelContext, points: &[FullExponent]) -> Result<CMat> {
    let d = ctx.dim();
    let n = points.len();
    let mut out = CMat::zeros(n * d, n * d);
    for (row, np) in points.iter().enumerate() {
        for (col, mp) in points.iter().enumerate() {
            let phase = transform_phase(ctx, mp, np)?;
            let block = ctx.eval(&mp.sub(np).to_group_element())?;
            let scaled = block.map(|z| z * phase.value());
            out.view_mut((row * d, col * d), (d, d)).copy_from(&scaled);
        }
    }
    Ok(hermitize(&out))
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformPositivityReport {
    pub trials: usize,
    pub seed: u64,
    /// max |D-form - moment-form| over the random trials.
    pub max_discrepancy: f64,
    /// min real part of the D-form over the random trials.
    pub min_value: f64,
    /// max imaginary part observed in either form (should be noise).
    pub max_imag: f64,
    /// max round-trip residual of inverse(forward(.)) and forward(inverse(.)).
    pub max_roundtrip_residual: f64,
    /// min eigenvalue of the moment-form matrix over the box.
    pub moment_min_eig: f64,
    /// D-form value on the transform of the minimizing eigenvector.
    pub witness_value: f64,
}

/// Evaluate the positivity quadratic form along both routes (the D-operator
/// double sum and the moment form after the inverse transform) on random
/// functions, plus on the adversarial witness built from the minimizing
/// eigenvector of the moment-form matrix.
///
/// The window's bounds are read as upper bounds for the nonnegative support
/// box (word bounds always; phase bounds when present, else 0).
pub fn positivity_via_transforms(
    ctx: &KernelContext,
    window: &Window,
    trials: usize,
    seed: u64,
) -> Result<TransformPositivityReport> {
    let k = ctx.k();
    let d = ctx.dim();
    let phase_bounds: Vec<i64> = match window.phase_bounds() {
        Some(b) => b.iter().map(|&x| x as i64).collect(),
        None => vec![0; pair_count(k)],
    };
    let word_bounds: Vec<i64> = window.word_bounds().iter().map(|&x| x as i64).collect();
    let bounds = FullExponent::new(phase_bounds, word_bounds)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_discrepancy = 0.0f64;
    let mut min_value = f64::INFINITY;
    let mut max_imag = 0.0f64;
    let mut max_roundtrip = 0.0f64;
    for _ in 0..trials {
        let g = FiniteSupportFunction::random(&bounds, d, &mut rng);
        let q1 = d_form_value(ctx, &g)?;
        let h = inverse_transform(ctx, &g)?;
        let q2 = moment_form_value(ctx, &h)?;
        max_discrepancy = max_discrepancy.max((q1 - q2).norm());
        min_value = min_value.min(q1.re);
        max_imag = max_imag.max(q1.im.abs()).max(q2.im.abs());
        let back = forward_transform(ctx, &h)?;
        max_roundtrip = max_roundtrip.max(back.distance(&g));
        let there = forward_transform(ctx, &g)?;
        let and_back = inverse_transform(ctx, &there)?;
        max_roundtrip = max_roundtrip.max(and_back.distance(&g));
    }

    let points = nonneg_box(&bounds);
    let m = moment_form_matrix(ctx, &points)?;
    let (vals, vecs) = crate::linalg::hermitian_eigen_desc(&m);
    let moment_min_eig = vals.last().copied().unwrap_or(0.0);
    let minvec = vecs.column(vals.len() - 1).clone_owned();
    let mut h_w = FiniteSupportFunction::new(k, d);
    for (i, pt) in points.iter().enumerate() {
        let slice = minvec.rows(i * d, d).clone_owned();
        h_w.insert(pt.clone(), slice)?;
    }
    let g_w = forward_transform(ctx, &h_w)?;
    let witness_value = d_form_value(ctx, &g_w)?.re;

    Ok(TransformPositivityReport {
        trials,
        seed,
        max_discrepancy,
        min_value: if min_value.is_finite() { min_value } else { 0.0 },
        max_imag,
        max_roundtrip_residual: max_roundtrip,
        moment_min_eig,
        witness_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cr, identity, op_norm};
    use crate::optuple::{
        generate_random, OperatorTuple, TupleClassSelector, DEFAULT_TOL,
    };
    use crate::qword::QSpec;

    fn nilpotent_pair() -> OperatorTuple {
        let t = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.0), cr(0.0)]);
        OperatorTuple::new(vec![t.clone(), t], QSpec::commutative(2), DEFAULT_TOL).unwrap()
    }

    fn delta(k: usize, at: FullExponent, v: CVec) -> FiniteSupportFunction {
        let mut f = FiniteSupportFunction::new(k, v.len());
        f.insert(at, v).unwrap();
        f
    }

    #[test]
    fn forward_of_delta_at_zero_is_itself() {
        let t = generate_random(TupleClassSelector::DoublyQCommuting, 2, 2, 0).unwrap();
        let ctx = KernelContext::new(t);
        let xi = CVec::from_fn(2, |i, _| Complex64::new(1.0 + i as f64, -0.5));
        let h = delta(2, FullExponent::zero(2), xi);
        let g = forward_transform(&ctx, &h).unwrap();
        assert!(g.distance(&h) < 1e-15);
    }

    #[test]
    fn forward_of_zero_is_zero() {
        let ctx = KernelContext::new(nilpotent_pair());
        let h = FiniteSupportFunction::new(2, 2);
        assert!(forward_transform(&ctx, &h).unwrap().is_empty());
    }

    #[test]
    fn inverse_of_delta_at_zero_is_itself() {
        let t = generate_random(TupleClassSelector::NormSum, 2, 2, 1).unwrap();
        let ctx = KernelContext::new(t);
        let xi = CVec::from_fn(2, |_, _| Complex64::new(0.3, 0.7));
        let g = delta(2, FullExponent::zero(2), xi);
        let h = inverse_transform(&ctx, &g).unwrap();
        assert!(h.distance(&g) < 1e-15);
    }

    #[test]
    fn inverse_of_single_positive_point_supported_below_it() {
        let t = generate_random(TupleClassSelector::DoublyQCommuting, 2, 2, 3).unwrap();
        let ctx = KernelContext::new(t);
        let at = FullExponent::new(vec![0], vec![1, 1]).unwrap();
        let g = delta(2, at.clone(), CVec::from_element(2, Complex64::new(1.0, 0.0)));
        let h = inverse_transform(&ctx, &g).unwrap();
        for (n, _) in h.support() {
            assert!(at.geq(n), "support point {n:?} not below {at:?}");
            assert!(n.is_nonneg());
        }
        // Direct expansion: h(n) = (-1)^{|v|} phase T(x^{e(v)}) g(n+e(v))
        // with exactly one contributing v per n.
        let full = h.support_len();
        assert!(full >= 4, "expected several support points, got {full}");
    }

    #[test]
    fn transforms_are_mutual_inverses_on_random_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..4 {
            let t = generate_random(TupleClassSelector::DoublyQCommuting, 2, 2, seed).unwrap();
            let ctx = KernelContext::new(t);
            let bounds = FullExponent::new(vec![1], vec![2, 2]).unwrap();
            for _ in 0..10 {
                let h = FiniteSupportFunction::random(&bounds, 2, &mut rng);
                let g = forward_transform(&ctx, &h).unwrap();
                let back = inverse_transform(&ctx, &g).unwrap();
                assert!(back.distance(&h) <= 1e-10 * h.norm().max(1.0));
                let g2 = FiniteSupportFunction::random(&bounds, 2, &mut rng);
                let h2 = inverse_transform(&ctx, &g2).unwrap();
                let fwd = forward_transform(&ctx, &h2).unwrap();
                assert!(fwd.distance(&g2) <= 1e-10 * g2.norm().max(1.0));
            }
        }
    }

    #[test]
    fn alternating_sum_closed_form_matches_enumeration() {
        for v0 in [vec![], vec![1], vec![1, 2, 3]] {
            let direct: i64 = (0u32..(1u32 << v0.len()))
                .map(|mask| if mask.count_ones() % 2 == 0 { 1 } else { -1 })
                .sum();
            assert_eq!(alternating_subset_sum(&v0), direct);
        }
    }

    #[test]
    fn d_operator_at_zero_is_identity() {
        let ctx = KernelContext::new(nilpotent_pair());
        let z = FullExponent::zero(2);
        let d = d_operator(&ctx, &z, &z).unwrap();
        assert!(op_norm(&(d - identity(2))) == 0.0);
    }

    #[test]
    fn d_operator_vanishes_off_diagonal() {
        for seed in [0, 4] {
            let t = generate_random(TupleClassSelector::DoublyQCommuting, 2, 2, seed).unwrap();
            let ctx = KernelContext::new(t);
            let bounds = FullExponent::new(vec![1], vec![2, 2]).unwrap();
            let points = nonneg_box(&bounds);
            for p in &points {
                for r in &points {
                    let d = d_operator(&ctx, p, r).unwrap();
                    if p == r {
                        let expect = diagonal_collapse_reference(&ctx, p).unwrap();
                        assert!(
                            op_norm(&(d - expect)) <= 1e-10,
                            "seed {seed} diagonal at {p:?}"
                        );
                    } else {
                        assert!(
                            op_norm(&d) <= 1e-10,
                            "seed {seed} off-diagonal at {p:?}, {r:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn diagonal_links_to_brehmer_operator() {
        let t = generate_random(TupleClassSelector::DoublyQCommuting, 3, 2, 6).unwrap();
        let ctx = KernelContext::new(t.clone());
        // Word-only support: D(p,p) = S(pi(p)).
        let p = FullExponent::new(vec![0], vec![2, 1]).unwrap();
        let d = d_operator(&ctx, &p, &p).unwrap();
        let s = t.brehmer_operator(&[0, 1]).unwrap();
        assert!(op_norm(&(d - s)) <= 1e-10);
        // Phase coordinate in the support: the alternating sum over the
        // phase-subset choices cancels termwise and D(p,p) vanishes.
        let p2 = FullExponent::new(vec![1], vec![2, 1]).unwrap();
        let d2 = d_operator(&ctx, &p2, &p2).unwrap();
        assert!(op_norm(&d2) <= 1e-10);
        let expect2 = diagonal_collapse_reference(&ctx, &p2).unwrap();
        assert!(op_norm(&expect2) <= 1e-12);
        // Phase-only support likewise vanishes: I - |q|^2 I = 0.
        let p3 = FullExponent::new(vec![1], vec![0, 0]).unwrap();
        let d3 = d_operator(&ctx, &p3, &p3).unwrap();
        assert!(op_norm(&d3) <= 1e-12);
    }

    #[test]
    fn positivity_report_on_passing_and_failing_tuples() {
        let good = generate_random(TupleClassSelector::NormSum, 2, 2, 2).unwrap();
        let ctx = KernelContext::new(good);
        let w = Window::uniform(2, 1);
        let report = positivity_via_transforms(&ctx, &w, 5, 7).unwrap();
        assert!(report.max_discrepancy <= 1e-9, "{report:?}");
        assert!(report.min_value >= -1e-8, "{report:?}");
        assert!(report.moment_min_eig >= -1e-8, "{report:?}");
        assert!(report.max_roundtrip_residual <= 1e-9, "{report:?}");

        let bad = KernelContext::new(nilpotent_pair());
        let report = positivity_via_transforms(&bad, &w, 5, 7).unwrap();
        assert!(report.moment_min_eig < -1e-3, "{report:?}");
        // The witness pushes the minimizing eigenvector through the forward
        // transform; both routes agree, so the D-form goes negative too.
        assert!(report.witness_value < -1e-3, "{report:?}");
        assert!(
            (report.witness_value - report.moment_min_eig).abs() <= 1e-8,
            "{report:?}"
        );
    }

    #[test]
    fn zero_function_gives_zero_form() {
        let ctx = KernelContext::new(nilpotent_pair());
        let g = FiniteSupportFunction::new(2, 2);
        assert_eq!(d_form_value(&ctx, &g).unwrap(), Complex64::new(0.0, 0.0));
    }
}
