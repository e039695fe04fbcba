//! Exact algebra of the twisted monomial group: normal forms, products,
//! inverses, powers, and a parser from free words.
//!
//! Elements are stored in the normal form `q^{m0} s_1^{m1} ... s_k^{mk}`,
//! i.e. as the pair of integer exponent vectors (one entry per ordered pair
//! `i < j` for the central phase generators, one entry per word generator).
//! Two elements are equal iff both vectors are equal, so all group laws are
//! checked integer arithmetic and never touch floating point.

use num_complex::Complex64;
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// Modulus slack accepted for float-represented unit scalars.
pub const UNIT_MODULUS_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QwordError {
    #[error("generator count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("integer overflow in exponent arithmetic")]
    ExponentOverflow,
    #[error("malformed token `{0}` (expected s<i> or s<i>^<z>)")]
    MalformedToken(String),
    #[error("generator index {index} out of range 1..={k}")]
    GeneratorOutOfRange { index: usize, k: usize },
    #[error("expected {expected} phases for k = {k}, got {got}")]
    PhaseCount { got: usize, expected: usize, k: usize },
    #[error("not a unit-modulus scalar (|z| off by {deviation:.3e})")]
    NotUnitModulus { deviation: f64 },
    #[error("zero denominator in rational turn")]
    ZeroDenominator,
}

type Result<T> = std::result::Result<T, QwordError>;

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

/// Exact point on the unit circle, `exp(2 pi i num/den)`, kept reduced with
/// `0 <= num < den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Turn {
    num: i64,
    den: i64,
}

impl Turn {
    pub const ZERO: Turn = Turn { num: 0, den: 1 };

    pub fn new(num: i64, den: i64) -> Result<Turn> {
        if den == 0 {
            return Err(QwordError::ZeroDenominator);
        }
        Self::reduce(num as i128, den as i128)
    }

    fn reduce(mut num: i128, mut den: i128) -> Result<Turn> {
        if den < 0 {
            num = -num;
            den = -den;
        }
        num = num.rem_euclid(den);
        let g = gcd(num, den).max(1);
        num /= g;
        den /= g;
        let num = i64::try_from(num).map_err(|_| QwordError::ExponentOverflow)?;
        let den = i64::try_from(den).map_err(|_| QwordError::ExponentOverflow)?;
        Ok(Turn { num, den })
    }

    pub fn numer(&self) -> i64 {
        self.num
    }

    pub fn denom(&self) -> i64 {
        self.den
    }

    pub fn add(&self, other: &Turn) -> Result<Turn> {
        let num = self.num as i128 * other.den as i128 + other.num as i128 * self.den as i128;
        let den = self.den as i128 * other.den as i128;
        Self::reduce(num, den)
    }

    /// `self` scaled by an integer exponent (the turn of `z^e`).
    pub fn scale(&self, e: i64) -> Result<Turn> {
        Self::reduce(self.num as i128 * e as i128, self.den as i128)
    }

    pub fn neg(&self) -> Turn {
        Turn::reduce(-(self.num as i128), self.den as i128).expect("reduced turn negation")
    }

    pub fn value(&self) -> Complex64 {
        let angle = std::f64::consts::TAU * (self.num as f64) / (self.den as f64);
        Complex64::new(angle.cos(), angle.sin())
    }
}

impl fmt::Display for Turn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// A unit-modulus scalar, carried exactly as a rational turn whenever
/// possible and as a raw complex number otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnitComplex {
    Exact(Turn),
    Float(Complex64),
}

impl UnitComplex {
    pub fn one() -> UnitComplex {
        UnitComplex::Exact(Turn::ZERO)
    }

    pub fn turn(num: i64, den: i64) -> Result<UnitComplex> {
        Ok(UnitComplex::Exact(Turn::new(num, den)?))
    }

    pub fn from_complex(z: Complex64) -> Result<UnitComplex> {
        let deviation = (z.norm() - 1.0).abs();
        if deviation > UNIT_MODULUS_TOL {
            return Err(QwordError::NotUnitModulus { deviation });
        }
        Ok(UnitComplex::Float(z))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, UnitComplex::Exact(_))
    }

    pub fn value(&self) -> Complex64 {
        match self {
            UnitComplex::Exact(t) => t.value(),
            UnitComplex::Float(z) => *z,
        }
    }

    pub fn inverse(&self) -> UnitComplex {
        match self {
            UnitComplex::Exact(t) => UnitComplex::Exact(t.neg()),
            UnitComplex::Float(z) => UnitComplex::Float(z.conj()),
        }
    }

    pub fn pow(&self, e: i64) -> Result<UnitComplex> {
        Ok(match self {
            UnitComplex::Exact(t) => UnitComplex::Exact(t.scale(e)?),
            UnitComplex::Float(z) => {
                let e32 = i32::try_from(e).map_err(|_| QwordError::ExponentOverflow)?;
                UnitComplex::Float(z.powi(e32))
            }
        })
    }

    pub fn mul(&self, other: &UnitComplex) -> Result<UnitComplex> {
        Ok(match (self, other) {
            (UnitComplex::Exact(a), UnitComplex::Exact(b)) => UnitComplex::Exact(a.add(b)?),
            _ => UnitComplex::Float(self.value() * other.value()),
        })
    }
}

impl fmt::Display for UnitComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitComplex::Exact(t) => write!(f, "turn {t}"),
            UnitComplex::Float(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}

/// The phase data `q_{ij}` for `k` generators: one unit scalar per pair
/// `i < j` in lexicographic order. The reversed phases `q_{ji} = q_{ij}^{-1}`
/// are produced by the accessor, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct QSpec {
    k: usize,
    phases: Vec<UnitComplex>,
}

impl QSpec {
    pub fn new(k: usize, phases: Vec<UnitComplex>) -> Result<QSpec> {
        let expected = pair_count(k);
        if phases.len() != expected {
            return Err(QwordError::PhaseCount {
                got: phases.len(),
                expected,
                k,
            });
        }
        Ok(QSpec { k, phases })
    }

    /// All phases 1: the plain commuting case.
    pub fn commutative(k: usize) -> QSpec {
        QSpec {
            k,
            phases: vec![UnitComplex::one(); pair_count(k)],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pair_count(&self) -> usize {
        self.phases.len()
    }

    pub fn is_exact(&self) -> bool {
        self.phases.iter().all(UnitComplex::is_exact)
    }

    /// `q_{ij}` for any `i != j` (0-based).
    pub fn phase(&self, i: usize, j: usize) -> UnitComplex {
        assert_ne!(i, j, "phase(i, i) is undefined");
        if i < j {
            self.phases[pair_index(self.k, i, j)]
        } else {
            self.phases[pair_index(self.k, j, i)].inverse()
        }
    }

    pub fn phase_pow(&self, i: usize, j: usize, e: i64) -> Result<UnitComplex> {
        if e == 0 {
            return Ok(UnitComplex::one());
        }
        self.phase(i, j).pow(e)
    }

    pub fn phases(&self) -> &[UnitComplex] {
        &self.phases
    }
}

pub fn pair_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// Index of the pair `(i, j)`, `i < j` (0-based), in lexicographic order.
pub fn pair_index(k: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < k);
    i * k - i * (i + 1) / 2 + (j - i - 1)
}

/// Enumerate the pairs `(i, j)`, `i < j`, in the storage order.
pub fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

fn checked_add(a: i64, b: i64) -> Result<i64> {
    a.checked_add(b).ok_or(QwordError::ExponentOverflow)
}

fn checked_mul(a: i64, b: i64) -> Result<i64> {
    a.checked_mul(b).ok_or(QwordError::ExponentOverflow)
}

/// Normal-form element `q^{m0} s_1^{m1} ... s_k^{mk}` of the twisted
/// monomial group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    phase_exp: Vec<i64>,
    word_exp: Vec<i64>,
}

impl GroupElement {
    pub fn identity(k: usize) -> GroupElement {
        GroupElement {
            phase_exp: vec![0; pair_count(k)],
            word_exp: vec![0; k],
        }
    }

    /// `s_{i+1}` (0-based index `i`).
    pub fn generator(k: usize, i: usize) -> Result<GroupElement> {
        Self::generator_pow(k, i, 1)
    }

    pub fn generator_pow(k: usize, i: usize, e: i64) -> Result<GroupElement> {
        if i >= k {
            return Err(QwordError::GeneratorOutOfRange { index: i + 1, k });
        }
        let mut g = Self::identity(k);
        g.word_exp[i] = e;
        Ok(g)
    }

    pub fn from_exponents(phase_exp: Vec<i64>, word_exp: Vec<i64>) -> Result<GroupElement> {
        let k = word_exp.len();
        if phase_exp.len() != pair_count(k) {
            return Err(QwordError::PhaseCount {
                got: phase_exp.len(),
                expected: pair_count(k),
                k,
            });
        }
        Ok(GroupElement {
            phase_exp,
            word_exp,
        })
    }

    pub fn k(&self) -> usize {
        self.word_exp.len()
    }

    pub fn phase_exp(&self) -> &[i64] {
        &self.phase_exp
    }

    pub fn word_exp(&self) -> &[i64] {
        &self.word_exp
    }

    pub fn is_identity(&self) -> bool {
        self.phase_exp.iter().all(|&x| x == 0) && self.word_exp.iter().all(|&x| x == 0)
    }

    fn check_k(&self, other: &GroupElement) -> Result<()> {
        if self.k() != other.k() {
            return Err(QwordError::DimensionMismatch {
                left: self.k(),
                right: other.k(),
            });
        }
        Ok(())
    }

    /// Normal form of `self * other`: with `self = x^m` and `other = x^n`,
    /// the word exponents add and each phase exponent `(i, j)` becomes
    /// `m_{ij} + n_{ij} - n_i m_j`.
    pub fn multiply(&self, other: &GroupElement) -> Result<GroupElement> {
        self.check_k(other)?;
        let k = self.k();
        let mut word = Vec::with_capacity(k);
        for i in 0..k {
            word.push(checked_add(self.word_exp[i], other.word_exp[i])?);
        }
        let mut phase = Vec::with_capacity(self.phase_exp.len());
        for (idx, (i, j)) in pairs(k).enumerate() {
            let cross = checked_mul(other.word_exp[i], self.word_exp[j])?;
            let sum = checked_add(self.phase_exp[idx], other.phase_exp[idx])?;
            phase.push(checked_add(sum, -cross)?);
        }
        Ok(GroupElement {
            phase_exp: phase,
            word_exp: word,
        })
    }

    /// Normal form of `self^{-1}`: word exponents negate and each phase
    /// exponent `(i, j)` becomes `-m_{ij} - m_i m_j`.
    pub fn inverse(&self) -> Result<GroupElement> {
        let k = self.k();
        let mut word = Vec::with_capacity(k);
        for &m in &self.word_exp {
            word.push(m.checked_neg().ok_or(QwordError::ExponentOverflow)?);
        }
        let mut phase = Vec::with_capacity(self.phase_exp.len());
        for (idx, (i, j)) in pairs(k).enumerate() {
            let cross = checked_mul(self.word_exp[i], self.word_exp[j])?;
            let neg = self.phase_exp[idx]
                .checked_neg()
                .ok_or(QwordError::ExponentOverflow)?;
            phase.push(checked_add(neg, -cross)?);
        }
        Ok(GroupElement {
            phase_exp: phase,
            word_exp: word,
        })
    }

    /// Integer power by the closed form: for `e >= 0`,
    /// `(x^m)^e = (e m_{ij} - C(e,2) m_i m_j ; e m)`.
    pub fn pow(&self, e: i64) -> Result<GroupElement> {
        if e < 0 {
            let p = e.checked_neg().ok_or(QwordError::ExponentOverflow)?;
            return self.inverse()?.pow(p);
        }
        let k = self.k();
        let choose2 = if e % 2 == 0 {
            checked_mul(e / 2, e - 1)?
        } else {
            checked_mul(e, (e - 1) / 2)?
        };
        let mut word = Vec::with_capacity(k);
        for &m in &self.word_exp {
            word.push(checked_mul(e, m)?);
        }
        let mut phase = Vec::with_capacity(self.phase_exp.len());
        for (idx, (i, j)) in pairs(k).enumerate() {
            let lin = checked_mul(e, self.phase_exp[idx])?;
            let cross = checked_mul(choose2, checked_mul(self.word_exp[i], self.word_exp[j])?)?;
            phase.push(checked_add(lin, -cross)?);
        }
        Ok(GroupElement {
            phase_exp: phase,
            word_exp: word,
        })
    }

    /// The scalar `prod q_{ij}^{m_{ij}}`; exact when every phase in `q` is.
    pub fn phase_value(&self, q: &QSpec) -> Result<UnitComplex> {
        if q.k() != self.k() {
            return Err(QwordError::DimensionMismatch {
                left: q.k(),
                right: self.k(),
            });
        }
        let mut acc = UnitComplex::one();
        for (idx, (i, j)) in pairs(self.k()).enumerate() {
            if self.phase_exp[idx] != 0 {
                acc = acc.mul(&q.phase_pow(i, j, self.phase_exp[idx])?)?;
            }
        }
        Ok(acc)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "e");
        }
        let mut parts = Vec::new();
        for (idx, (i, j)) in pairs(self.k()).enumerate() {
            let e = self.phase_exp[idx];
            if e == 1 {
                parts.push(format!("q{}{}", i + 1, j + 1));
            } else if e != 0 {
                parts.push(format!("q{}{}^{}", i + 1, j + 1, e));
            }
        }
        for (i, &m) in self.word_exp.iter().enumerate() {
            if m == 1 {
                parts.push(format!("s{}", i + 1));
            } else if m != 0 {
                parts.push(format!("s{}^{}", i + 1, m));
            }
        }
        write!(f, "{}", parts.join(" "))
    }
}

/// Parse a whitespace-separated free word over `s1..sk` (tokens `s<i>` or
/// `s<i>^<z>`) into its normal form by folding the group product left to
/// right. The empty string is the identity.
pub fn parse_word(text: &str, k: usize) -> Result<GroupElement> {
    let mut acc = GroupElement::identity(k);
    for token in text.split_whitespace() {
        let factor = parse_token(token, k)?;
        acc = acc.multiply(&factor)?;
    }
    Ok(acc)
}

fn parse_token(token: &str, k: usize) -> Result<GroupElement> {
    let malformed = || QwordError::MalformedToken(token.to_string());
    let rest = token.strip_prefix('s').ok_or_else(malformed)?;
    let (index_str, exp) = match rest.split_once('^') {
        Some((idx, e)) => {
            if e.is_empty() || e == "-" {
                return Err(malformed());
            }
            let exp: i64 = e.parse().map_err(|_| malformed())?;
            (idx, exp)
        }
        None => (rest, 1),
    };
    if index_str.is_empty() || !index_str.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed());
    }
    let index: usize = index_str.parse().map_err(|_| malformed())?;
    if index == 0 || index > k {
        return Err(QwordError::GeneratorOutOfRange { index, k });
    }
    GroupElement::generator_pow(k, index - 1, exp)
}

/// Componentwise positive/negative parts `(m^+, m^-)` with
/// `m^+ - m^- = m`.
pub fn split_pm(m: &[i64]) -> (Vec<i64>, Vec<i64>) {
    let plus = m.iter().map(|&x| x.max(0)).collect();
    let minus = m.iter().map(|&x| (-x).max(0)).collect();
    (plus, minus)
}

/// Indicator vector `e(v)` of a subset of `{0..k-1}`.
pub fn indicator(v: &[usize], k: usize) -> Result<Vec<i64>> {
    let mut out = vec![0i64; k];
    for &i in v {
        if i >= k {
            return Err(QwordError::GeneratorOutOfRange { index: i + 1, k });
        }
        out[i] = 1;
    }
    Ok(out)
}

/// Support `pi(m)`: indices with strictly positive entries.
pub fn support(m: &[i64]) -> Vec<usize> {
    m.iter()
        .enumerate()
        .filter(|(_, &x)| x > 0)
        .map(|(i, _)| i)
        .collect()
}

/// Window-free memo key helper used by the kernel cache.
pub type ElementMap<V> = HashMap<GroupElement, V>;
