//! Small dense complex linear algebra helpers shared by the other modules.
//!
//! Everything here is a thin layer over `nalgebra`: Hermitian
//! eigendecompositions with a deterministic ordering and sign convention,
//! operator norms through the Gram route, and orthonormal bases of ranges and
//! their complements.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// (A + A*)/2.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Operator 2-norm, computed as the square root of the largest eigenvalue of
/// A*A. Matrices here are small enough that the squared conditioning does not
/// matter.
pub fn op_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let gram = a.adjoint() * a;
    let eigs = hermitian_eigenvalues(&gram);
    eigs.iter().fold(0.0f64, |m, &x| m.max(x)).max(0.0).sqrt()
}

/// Eigenvalues of a Hermitian matrix, unsorted.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    hermitize(a).symmetric_eigenvalues().iter().copied().collect()
}

pub fn min_eig_hermitian(a: &CMat) -> f64 {
    hermitian_eigenvalues(a)
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Hermitian eigendecomposition sorted by descending eigenvalue, with each
/// eigenvector normalized so its largest-magnitude entry is real positive.
/// The ordering and sign convention make downstream constructions
/// reproducible.
pub fn hermitian_eigen_desc(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitize(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut col = eig.eigenvectors.column(src).clone_owned();
        fix_column_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

fn fix_column_sign(col: &mut CVec) {
    let mut best = 0usize;
    let mut best_norm = 0.0f64;
    for (i, z) in col.iter().enumerate() {
        let n = z.norm();
        if n > best_norm {
            best_norm = n;
            best = i;
        }
    }
    if best_norm > 0.0 {
        let z = col[best];
        let rot = z.conj() / z.norm();
        for v in col.iter_mut() {
            *v *= rot;
        }
    }
}

/// Thin factorization of the range of `a`: columns of `q` are an orthonormal
/// basis, `sigma[i] > tol` are the kept singular values and `v` the matching
/// right factors, so that `a ≈ q * diag(sigma) * v^*`.
///
/// Computed through the Hermitian eigendecomposition of `a* a`; `tol_sq` is
/// compared against the eigenvalues of that Gram matrix (i.e. against
/// sigma squared), which keeps rank decisions on the same scale as the GNS
/// Gram truncation.
pub struct ThinRange {
    pub q: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
    /// Dropped-vs-kept margin is within a factor of 10 of the cut: the rank
    /// decision is ambiguous at this tolerance.
    pub rank_ambiguous: bool,
}

pub fn thin_range(a: &CMat, tol_sq: f64) -> ThinRange {
    let n = a.ncols();
    let gram = a.adjoint() * a;
    let (vals, vecs) = hermitian_eigen_desc(&gram);
    let mut kept = 0usize;
    let mut ambiguous = false;
    for &l in &vals {
        if l > tol_sq {
            kept += 1;
        }
        if l > tol_sq / 10.0 && l < tol_sq * 10.0 {
            ambiguous = true;
        }
    }
    let mut q = CMat::zeros(a.nrows(), kept);
    let mut v = CMat::zeros(n, kept);
    let mut sigma = Vec::with_capacity(kept);
    for i in 0..kept {
        let s = vals[i].max(0.0).sqrt();
        sigma.push(s);
        let vi = vecs.column(i).clone_owned();
        let qi = (a * &vi).unscale(s);
        q.set_column(i, &qi);
        v.set_column(i, &vi);
    }
    ThinRange {
        q,
        sigma,
        v,
        rank_ambiguous: ambiguous,
    }
}

/// Orthonormal basis of the orthogonal complement of the (orthonormal)
/// columns of `q`, chosen deterministically: eigenvectors of the complement
/// projector in descending eigenvalue order with the sign convention of
/// [`hermitian_eigen_desc`].
pub fn complement_onb(q: &CMat, full_dim: usize) -> CMat {
    let s = q.ncols();
    let want = full_dim - s;
    if want == 0 {
        return CMat::zeros(full_dim, 0);
    }
    let proj = identity(full_dim) - q * q.adjoint();
    let (_, vecs) = hermitian_eigen_desc(&proj);
    vecs.columns(0, want).clone_owned()
}

/// Closest matrix with orthonormal columns: w (w* w)^{-1/2}.
pub fn polar_orthonormalize(w: &CMat) -> CMat {
    let gram = w.adjoint() * w;
    let (vals, vecs) = hermitian_eigen_desc(&gram);
    let mut inv_sqrt = CMat::zeros(gram.nrows(), gram.ncols());
    for (i, &l) in vals.iter().enumerate() {
        let col = vecs.column(i);
        let f = cr(1.0 / l.max(f64::MIN_POSITIVE).sqrt());
        inv_sqrt += (col * col.adjoint()).scale_complex(f);
    }
    w * inv_sqrt
}

trait ScaleComplex {
    fn scale_complex(self, f: Complex64) -> Self;
}

impl ScaleComplex for CMat {
    fn scale_complex(mut self, f: Complex64) -> Self {
        for v in self.iter_mut() {
            *v *= f;
        }
        self
    }
}

/// Nonnegative integer matrix power.
pub fn matrix_power(a: &CMat, n: u64) -> CMat {
    let mut out = identity(a.nrows());
    for _ in 0..n {
        out = &out * a;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_eigen_handles_complex_offdiagonal() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let m = CMat::from_row_slice(2, 2, &[cr(2.0), c(0.0, 1.0), c(0.0, -1.0), cr(2.0)]);
        let (vals, vecs) = hermitian_eigen_desc(&m);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        let recon = &vecs
            * CMat::from_diagonal(&CVec::from_iterator(2, vals.iter().map(|&l| cr(l))))
            * vecs.adjoint();
        assert!(op_norm(&(recon - m)) < 1e-12);
    }

    #[test]
    fn op_norm_of_nilpotent_jordan_block() {
        let m = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.0), cr(0.0)]);
        assert!((op_norm(&m) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn thin_range_and_complement_partition_space() {
        let a = CMat::from_row_slice(
            3,
            2,
            &[cr(1.0), cr(1.0), c(0.0, 1.0), c(0.0, 1.0), cr(0.0), cr(0.0)],
        );
        // rank 1
        let tr = thin_range(&a, 1e-20);
        assert_eq!(tr.q.ncols(), 1);
        let comp = complement_onb(&tr.q, 3);
        assert_eq!(comp.ncols(), 2);
        let full = CMat::from_columns(
            &tr.q
                .column_iter()
                .chain(comp.column_iter())
                .map(|col| col.clone_owned())
                .collect::<Vec<_>>(),
        );
        assert!(op_norm(&(full.adjoint() * &full - identity(3))) < 1e-12);
    }

    #[test]
    fn polar_orthonormalize_fixes_near_isometry() {
        let w = CMat::from_row_slice(
            3,
            2,
            &[
                cr(1.0 + 1e-9),
                cr(0.0),
                cr(0.0),
                cr(1.0),
                cr(1e-9),
                cr(0.0),
            ],
        );
        let q = polar_orthonormalize(&w);
        assert!(op_norm(&(q.adjoint() * &q - identity(2))) < 1e-12);
        assert!(op_norm(&(q - w)) < 1e-8);
    }
}
