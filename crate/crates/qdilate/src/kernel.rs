//! The operator-valued function T on the twisted monomial group, Gram
//! matrices over finite windows, and the related residual checks.
//!
//! For an element `q^{m0} s_1^{m1} ... s_k^{mk}` the kernel value is
//!
//! ```text
//! T = q^{m0} * prod_{i<j} q_{ij}^{-m_i^+ m_j^-}
//!     * [(T_1^{m_1^-})^* ... (T_k^{m_k^-})^*] * [T_1^{m_1^+} ... T_k^{m_k^+}]
//! ```
//!
//! which for doubly q-commuting tuples coincides with the interleaved
//! product `q^{m0} T_1(m_1) ... T_k(m_k)` (see
//! [`KernelContext::doubly_coincidence_residual`]).

use crate::linalg::{hermitize, identity, matrix_power, min_eig_hermitian, op_norm, CMat};
use crate::optuple::{OperatorTuple, TupleError};
use crate::qword::{pair_count, pairs, split_pm, GroupElement, QwordError, UnitComplex};
use rayon::prelude::*;
use std::collections::{HashMap, HashSet};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("gram matrix would be {need} rows, cap is {cap}")]
    CapExceeded { need: usize, cap: usize },
    #[error("exponent vector has a negative entry where nonnegative is required")]
    NegativeExponent,
    #[error("exponent vector length {got} does not match k = {k}")]
    BadExponentLength { got: usize, k: usize },
    #[error("ordered monomial repeats generator index {0}")]
    RepeatedIndex(usize),
    #[error("window has no elements")]
    EmptyWindow,
    #[error(transparent)]
    Word(#[from] QwordError),
    #[error(transparent)]
    Tuple(#[from] TupleError),
}

type Result<T> = std::result::Result<T, KernelError>;

pub const DEFAULT_GRAM_CAP: usize = 4096;

/// Finite truncation of the exponent lattice: word exponents bounded
/// componentwise by `word_bounds`, phase exponents pinned to zero unless
/// `phase_bounds` is set.
///
/// Phase-free windows are the default: the kernel is equivariant under the
/// central phase generators, so the full Gram is a rank-one unimodular twist
/// of the phase-free one (`gram_with_phase_coords_is_rank_one_twist` in the
/// tests exercises this).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    word_bounds: Vec<u32>,
    phase_bounds: Option<Vec<u32>>,
}

impl Window {
    pub fn new(word_bounds: Vec<u32>) -> Window {
        Window {
            word_bounds,
            phase_bounds: None,
        }
    }

    pub fn uniform(k: usize, l: u32) -> Window {
        Window::new(vec![l; k])
    }

    pub fn with_phase_bounds(word_bounds: Vec<u32>, phase_bounds: Vec<u32>) -> Result<Window> {
        let k = word_bounds.len();
        if phase_bounds.len() != pair_count(k) {
            return Err(KernelError::Word(QwordError::PhaseCount {
                got: phase_bounds.len(),
                expected: pair_count(k),
                k,
            }));
        }
        Ok(Window {
            word_bounds,
            phase_bounds: Some(phase_bounds),
        })
    }

    pub fn k(&self) -> usize {
        self.word_bounds.len()
    }

    pub fn word_bounds(&self) -> &[u32] {
        &self.word_bounds
    }

    pub fn phase_bounds(&self) -> Option<&[u32]> {
        self.phase_bounds.as_deref()
    }

    pub fn element_count(&self) -> usize {
        let words: usize = self
            .word_bounds
            .iter()
            .map(|&l| 2 * l as usize + 1)
            .product();
        let phases: usize = match &self.phase_bounds {
            None => 1,
            Some(b) => b.iter().map(|&l| 2 * l as usize + 1).product(),
        };
        words * phases
    }

    /// All window elements in a fixed order: phase exponents vary outermost
    /// (slowest), word exponents innermost, each coordinate from -bound to
    /// +bound.
    pub fn elements(&self) -> Vec<GroupElement> {
        let k = self.k();
        let phase_ranges: Vec<i64> = match &self.phase_bounds {
            None => vec![0; pair_count(k)],
            Some(b) => b.iter().map(|&l| l as i64).collect(),
        };
        let word_ranges: Vec<i64> = self.word_bounds.iter().map(|&l| l as i64).collect();
        let mut out = Vec::with_capacity(self.element_count());
        let mut phase = vec![0i64; phase_ranges.len()];
        enumerate_box(&phase_ranges, &mut phase, 0, &mut |phase| {
            let mut word = vec![0i64; k];
            enumerate_box(&word_ranges, &mut word, 0, &mut |word| {
                out.push(
                    GroupElement::from_exponents(phase.to_vec(), word.to_vec())
                        .expect("consistent lengths"),
                );
            });
        });
        out
    }

    /// The window shrunk by one in every word coordinate; `None` if any
    /// bound is already zero.
    pub fn shrink(&self) -> Option<Window> {
        if self.word_bounds.iter().any(|&l| l == 0) {
            return None;
        }
        Some(Window {
            word_bounds: self.word_bounds.iter().map(|&l| l - 1).collect(),
            phase_bounds: self.phase_bounds.clone(),
        })
    }
}

fn enumerate_box(bounds: &[i64], cur: &mut Vec<i64>, depth: usize, f: &mut impl FnMut(&[i64])) {
    if depth == bounds.len() {
        f(cur);
        return;
    }
    for v in -bounds[depth]..=bounds[depth] {
        cur[depth] = v;
        enumerate_box(bounds, cur, depth + 1, f);
    }
}

/// The kernel attached to one operator tuple, with a normal-form-keyed memo
/// cache (Gram assembly reuses values heavily). The cache is insert-only and
/// idempotent, so concurrent duplicate computation is harmless.
pub struct KernelContext {
    tuple: OperatorTuple,
    cache: Mutex<HashMap<GroupElement, CMat>>,
    gram_cap: usize,
}

impl KernelContext {
    pub fn new(tuple: OperatorTuple) -> KernelContext {
        Self::with_gram_cap(tuple, DEFAULT_GRAM_CAP)
    }

    pub fn with_gram_cap(tuple: OperatorTuple, cap: usize) -> KernelContext {
        KernelContext {
            tuple,
            cache: Mutex::new(HashMap::new()),
            gram_cap: cap,
        }
    }

    pub fn tuple(&self) -> &OperatorTuple {
        &self.tuple
    }

    pub fn dim(&self) -> usize {
        self.tuple.dim()
    }

    pub fn k(&self) -> usize {
        self.tuple.k()
    }

    pub fn gram_cap(&self) -> usize {
        self.gram_cap
    }

    fn check_k(&self, g: &GroupElement) -> Result<()> {
        if g.k() != self.k() {
            return Err(KernelError::Word(QwordError::DimensionMismatch {
                left: g.k(),
                right: self.k(),
            }));
        }
        Ok(())
    }

    /// T(g). Values are memoized by normal form.
    pub fn eval(&self, g: &GroupElement) -> Result<CMat> {
        self.check_k(g)?;
        if let Some(hit) = self.cache.lock().expect("cache lock").get(g) {
            return Ok(hit.clone());
        }
        let value = self.eval_uncached(g)?;
        self.cache
            .lock()
            .expect("cache lock")
            .insert(g.clone(), value.clone());
        Ok(value)
    }

    fn eval_uncached(&self, g: &GroupElement) -> Result<CMat> {
        let k = self.k();
        let q = self.tuple.q();
        let (mp, mm) = split_pm(g.word_exp());
        let mut phase = g.phase_value(q)?;
        for (i, j) in pairs(k) {
            let e = mp[i]
                .checked_mul(mm[j])
                .ok_or(QwordError::ExponentOverflow)?;
            phase = phase.mul(&q.phase_pow(i, j, -e)?)?;
        }
        // (T_1^{m1^-})^* ... (T_k^{mk^-})^* computed as the adjoint of the
        // descending product T_k^{mk^-} ... T_1^{m1^-}.
        let mut desc = identity(self.dim());
        for i in (0..k).rev() {
            desc *= matrix_power(self.tuple.mat(i), mm[i] as u64);
        }
        let mut fwd = identity(self.dim());
        for i in 0..k {
            fwd *= matrix_power(self.tuple.mat(i), mp[i] as u64);
        }
        let scalar = phase.value();
        Ok((desc.adjoint() * fwd).map(|z| z * scalar))
    }

    /// T evaluated on a word-only exponent vector.
    pub fn eval_word(&self, m: &[i64]) -> Result<CMat> {
        if m.len() != self.k() {
            return Err(KernelError::BadExponentLength {
                got: m.len(),
                k: self.k(),
            });
        }
        self.eval(&GroupElement::from_exponents(
            vec![0; pair_count(self.k())],
            m.to_vec(),
        )?)
    }

    /// The ordered-monomial kernel `T(s_{i_1}^{m_1} ... s_{i_t}^{m_t})` for
    /// distinct generator indices in an arbitrary order:
    /// `prod_{a<b} q_{i_a i_b}^{-m_a^+ m_b^-} [(T_{i_1}^{m_1^-})^* ...][T_{i_1}^{m_1^+} ...]`.
    pub fn eval_ordered_monomial(&self, factors: &[(usize, i64)]) -> Result<CMat> {
        let k = self.k();
        let q = self.tuple.q();
        let mut seen = HashSet::new();
        for &(i, _) in factors {
            if i >= k {
                return Err(KernelError::Tuple(TupleError::IndexOutOfRange { index: i, k }));
            }
            if !seen.insert(i) {
                return Err(KernelError::RepeatedIndex(i));
            }
        }
        let mut phase = UnitComplex::one();
        for a in 0..factors.len() {
            for b in (a + 1)..factors.len() {
                let (ia, ma) = factors[a];
                let (ib, mb) = factors[b];
                let e = ma
                    .max(0)
                    .checked_mul((-mb).max(0))
                    .ok_or(QwordError::ExponentOverflow)?;
                if ia != ib && e != 0 {
                    phase = phase.mul(&q.phase_pow(ia, ib, -e)?)?;
                }
            }
        }
        let mut desc = identity(self.dim());
        for &(i, m) in factors.iter().rev() {
            desc *= matrix_power(self.tuple.mat(i), (-m).max(0) as u64);
        }
        let mut fwd = identity(self.dim());
        for &(i, m) in factors {
            fwd *= matrix_power(self.tuple.mat(i), m.max(0) as u64);
        }
        let scalar = phase.value();
        Ok((desc.adjoint() * fwd).map(|z| z * scalar))
    }

    /// `|| T(g^{-1}) - T(g)^* ||`.
    pub fn star_symmetry_residual(&self, g: &GroupElement) -> Result<f64> {
        let lhs = self.eval(&g.inverse()?)?;
        let rhs = self.eval(g)?.adjoint();
        Ok(op_norm(&(lhs - rhs)))
    }

    /// `|| T(x^n) T(x^m) - prod q_{ij}^{-m_i n_j} T(x^{n+m}) ||` for
    /// componentwise nonnegative word exponents.
    ///
    /// The phase follows the group product `x^n x^m = prod q_{ij}^{-m_i n_j}
    /// x^{n+m}`: on the nonnegative cone the kernel is multiplicative.
    pub fn composition_residual(&self, n: &[i64], m: &[i64]) -> Result<f64> {
        let k = self.k();
        if n.len() != k {
            return Err(KernelError::BadExponentLength { got: n.len(), k });
        }
        if m.len() != k {
            return Err(KernelError::BadExponentLength { got: m.len(), k });
        }
        if n.iter().chain(m.iter()).any(|&x| x < 0) {
            return Err(KernelError::NegativeExponent);
        }
        let q = self.tuple.q();
        let lhs = self.eval_word(n)? * self.eval_word(m)?;
        let mut phase = UnitComplex::one();
        for (i, j) in pairs(k) {
            let e = m[i].checked_mul(n[j]).ok_or(QwordError::ExponentOverflow)?;
            phase = phase.mul(&q.phase_pow(i, j, -e)?)?;
        }
        let sum: Vec<i64> = n.iter().zip(m).map(|(&a, &b)| a + b).collect();
        let scalar = phase.value();
        let rhs = self.eval_word(&sum)?.map(|z| z * scalar);
        Ok(op_norm(&(lhs - rhs)))
    }

    /// Distance between the general kernel and the interleaved
    /// doubly-q-commuting form `q^{m0} T_1(m_1) ... T_k(m_k)` with
    /// `T_i(m) = T_i^m (m >= 1), I (m = 0), (T_i^{|m|})^* (m < 0)`.
    pub fn doubly_coincidence_residual(&self, g: &GroupElement) -> Result<f64> {
        self.check_k(g)?;
        let mut prod = identity(self.dim());
        for (i, &m) in g.word_exp().iter().enumerate() {
            let factor = if m >= 0 {
                matrix_power(self.tuple.mat(i), m as u64)
            } else {
                matrix_power(self.tuple.mat(i), (-m) as u64).adjoint()
            };
            prod *= factor;
        }
        let scalar = g.phase_value(self.tuple.q())?.value();
        let interleaved = prod.map(|z| z * scalar);
        Ok(op_norm(&(self.eval(g)? - interleaved)))
    }

    /// Hermitian block Gram matrix `K[t, s] = T(t^{-1} s)` over the window,
    /// symmetrized after assembly.
    pub fn gram_matrix(&self, w: &Window) -> Result<CMat> {
        let elements = w.elements();
        if elements.is_empty() {
            return Err(KernelError::EmptyWindow);
        }
        let d = self.dim();
        let n = elements.len();
        let need = n * d;
        if need > self.gram_cap {
            return Err(KernelError::CapExceeded {
                need,
                cap: self.gram_cap,
            });
        }
        let inverses: Vec<GroupElement> = elements
            .iter()
            .map(|e| e.inverse())
            .collect::<std::result::Result<_, _>>()?;
        let mut products = vec![Vec::with_capacity(n); n];
        let mut unique = HashSet::new();
        for (r, inv) in inverses.iter().enumerate() {
            for e in &elements {
                let p = inv.multiply(e)?;
                unique.insert(p.clone());
                products[r].push(p);
            }
        }
        let unique: Vec<GroupElement> = unique.into_iter().collect();
        let values: Vec<(GroupElement, CMat)> = unique
            .into_par_iter()
            .map(|g| {
                let v = self.eval(&g).expect("dimensions already checked");
                (g, v)
            })
            .collect();
        let table: HashMap<&GroupElement, &CMat> = values.iter().map(|(g, v)| (g, v)).collect();
        let mut gram = CMat::zeros(need, need);
        for r in 0..n {
            for c in 0..n {
                let block = table[&products[r][c]];
                gram.view_mut((r * d, c * d), (d, d)).copy_from(block);
            }
        }
        Ok(hermitize(&gram))
    }

    /// Appendix defect identity for doubly q-commuting tuples: the norm of
    /// LHS - RHS in
    ///
    /// ```text
    /// (prod T_i^{e_i(w)})^* [prod (T_i^{c_i^-})^* T_i^{c_i^+}] (prod T_i^{e_i(v)})
    ///   = prod q_{ij}^{-e_i(v)(e_j(w)-e_j(v))} (T^{e(u)})^* T^{e(u)}
    /// ```
    ///
    /// with `c = e(w) - e(v)` and `u = v union w`.
    pub fn appendix_identity_residual(&self, v: &[usize], w: &[usize]) -> Result<f64> {
        let k = self.k();
        let t = &self.tuple;
        let q = t.q();
        let ev = crate::qword::indicator(v, k)?;
        let ew = crate::qword::indicator(w, k)?;
        let mut middle = identity(self.dim());
        for i in 0..k {
            let c = ew[i] - ev[i];
            let factor = if c >= 0 {
                matrix_power(t.mat(i), c as u64)
            } else {
                matrix_power(t.mat(i), (-c) as u64).adjoint()
            };
            middle *= factor;
        }
        let pw = t.ordered_product(w)?;
        let pv = t.ordered_product(v)?;
        let lhs = pw.adjoint() * middle * pv;

        let mut union: Vec<usize> = v.iter().chain(w.iter()).copied().collect();
        union.sort_unstable();
        union.dedup();
        let pu = t.ordered_product(&union)?;
        let mut phase = UnitComplex::one();
        for (i, j) in pairs(k) {
            let e = -ev[i] * (ew[j] - ev[j]);
            phase = phase.mul(&q.phase_pow(i, j, e)?)?;
        }
        let scalar = phase.value();
        let rhs = (pu.adjoint() * pu).map(|z| z * scalar);
        Ok(op_norm(&(lhs - rhs)))
    }

    /// Search windows of increasing uniform bound for a Gram matrix with an
    /// eigenvalue below `-eig_tol`. Absence within the budget is reported as
    /// inconclusive, not as a pass: the positivity theorem guarantees a
    /// failing window exists somewhere when Brehmer fails, not where.
    pub fn search_nonpsd_window(&self, max_bound: u32, eig_tol: f64) -> Result<NonPsdSearch> {
        for l in 1..=max_bound {
            let w = Window::uniform(self.k(), l);
            if w.element_count() * self.dim() > self.gram_cap {
                break;
            }
            let gram = self.gram_matrix(&w)?;
            let min_eig = min_eig_hermitian(&gram);
            if min_eig < -eig_tol {
                return Ok(NonPsdSearch::Found { bound: l, min_eig });
            }
        }
        Ok(NonPsdSearch::Inconclusive { max_bound })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonPsdSearch {
    Found { bound: u32, min_eig: f64 },
    Inconclusive { max_bound: u32 },
}
