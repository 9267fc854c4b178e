//! Dense complex linear algebra helpers shared by the point-scale modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Real matrix literal, row-major.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    assert_eq!(data.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| c(data[i * cols + j], 0.0))
}

pub fn frob_norm_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frob_norm(m: &CMatrix) -> f64 {
    frob_norm_sq(m).sqrt()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Kronecker product with index `i * b.nrows() + i'`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermEigen {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let n = m.nrows();
        if n == 0 {
            return Ok(Self {
                values: Vec::new(),
                vectors: CMatrix::zeros(0, 0),
            });
        }
        let h = hermitian_part(m);
        let eig = h.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        let out = Self { values, vectors };
        let err = frob_norm(&(out.apply(|x| x) - &h));
        let scale = frob_norm(&h).max(1.0);
        if !(err <= 1e-9 * scale) {
            return Err(Error::IllConditionedSpectrum { err });
        }
        Ok(out)
    }

    /// `U f(Λ) U†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let u = &self.vectors;
        let n = u.nrows();
        let mut scaled = u.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * u.adjoint()
    }
}

pub fn herm_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    Ok(HermEigen::new(m)?.apply(f))
}

/// Inverse and positive square roots of a Hermitian positive-definite matrix.
/// Refuses condition numbers above `1e12`.
pub struct PdRoots {
    pub inv: CMatrix,
    pub sqrt: CMatrix,
    pub inv_sqrt: CMatrix,
}

pub fn pd_roots(h: &CMatrix) -> Result<PdRoots> {
    let e = HermEigen::new(h)?;
    if let (Some(&lo), Some(&hi)) = (e.values.first(), e.values.last()) {
        if !(lo > 0.0) || hi / lo > 1e12 {
            let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            return Err(Error::SingularMetric { cond });
        }
    }
    Ok(PdRoots {
        inv: e.apply(|x| 1.0 / x),
        sqrt: e.apply(f64::sqrt),
        inv_sqrt: e.apply(|x| 1.0 / x.sqrt()),
    })
}

/// Orthonormal basis for the column span. Columns whose residual after
/// projection falls below `tol` times the largest input column norm are dropped.
pub fn orthonormalize(cols: &CMatrix, tol: f64) -> CMatrix {
    let n = cols.nrows();
    let scale = (0..cols.ncols()).map(|j| cols.column(j).norm()).fold(0.0, f64::max);
    let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    if scale == 0.0 {
        return CMatrix::zeros(n, 0);
    }
    for j in 0..cols.ncols() {
        let mut v = cols.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let p = b.dotc(&v);
                v -= b * p;
            }
        }
        let nv = v.norm();
        if nv > tol * scale {
            basis.push(v / c(nv, 0.0));
        }
        if basis.len() == n {
            break;
        }
    }
    let mut out = CMatrix::zeros(n, basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// Orthonormal basis of the null space of `m`, singular values below
/// `tol * max(1, σ_max)` count as zero.
pub fn null_space(m: &CMatrix, tol: f64) -> CMatrix {
    let cols = m.ncols();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return identity(cols);
    }
    // Zero rows pad to square so the thin SVD carries a full right basis.
    let rows = m.nrows().max(cols);
    let mut padded = CMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), m.shape()).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = tol * top.max(1.0);
    let keep: Vec<usize> = (0..cols).filter(|&j| svd.singular_values[j] <= cut).collect();
    CMatrix::from_fn(cols, keep.len(), |i, j| v_t[(keep[j], i)].conj())
}

/// Orthonormal basis of `span(a) ∩ span(b)` for orthonormal `a`, `b`.
pub fn intersect(a: &CMatrix, b: &CMatrix, tol: f64) -> CMatrix {
    let n = a.nrows();
    if a.ncols() == 0 || b.ncols() == 0 {
        return CMatrix::zeros(n, 0);
    }
    // x ∈ span(a) ∩ span(b) iff x = a y with ‖(I - b b†) a y‖ = 0.
    let resid = a - b * (b.adjoint() * a);
    let ker = null_space(&resid, tol);
    orthonormalize(&(a * ker), tol)
}

/// Orthogonal projector `B B†` onto the span of orthonormal columns.
pub fn projector(b: &CMatrix) -> CMatrix {
    b * b.adjoint()
}

/// Largest principal angle between the spans of orthonormal `a` and `b`
/// of equal dimension; `π/2` when dimensions differ.
pub fn subspace_angle(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    // sin of the largest angle = ‖(I - P_b) a‖₂.
    let r = a - b * (b.adjoint() * a);
    let s = r.singular_values().iter().copied().fold(0.0, f64::max);
    s.min(1.0).asin()
}

/// Eigenvalues of a general complex square matrix.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    match nalgebra::Schur::new(m.clone()).eigenvalues() {
        Some(v) => v.iter().copied().collect(),
        None => Vec::new(),
    }
}

pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}
