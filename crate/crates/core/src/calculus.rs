//! Functional calculus of Hermitian endomorphisms in their eigenbases.

use crate::error::Result;
use crate::linalg::{CMatrix, HermEigen};
use crate::rep::TwistedRep;

/// `Ψ(x,y) = (e^{y−x} − (y−x) − 1)/(y−x)²`, `Ψ(x,x) = 1/2`.
pub fn big_psi(x: f64, y: f64) -> f64 {
    let d = y - x;
    if d.abs() < 1e-3 {
        // Taylor series of (e^d - d - 1)/d².
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 3..12 {
            term *= d / k as f64;
            sum += term;
        }
        sum
    } else {
        (d.exp_m1() - d) / (d * d)
    }
}

/// `ψ(x,y) = e^{x−y}`.
pub fn small_psi(x: f64, y: f64) -> f64 {
    (x - y).exp()
}

/// Divided difference `dφ(x,y) = (φ(y) − φ(x))/(y − x)` with `dφ(x,x) = φ'(x)`.
pub fn divided_difference(f: impl Fn(f64) -> f64, fprime: impl Fn(f64) -> f64, x: f64, y: f64) -> f64 {
    let d = y - x;
    if d.abs() <= 1e-7 * (1.0 + x.abs().max(y.abs())) {
        fprime(0.5 * (x + y))
    } else {
        (f(y) - f(x)) / d
    }
}

/// Eigenvalues within `1e-12` relative of each other are replaced by their
/// cluster mean, which is the continuous extension of `F` on a degenerate
/// eigenspace.
fn clustered(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    let mut i = 0;
    while i < values.len() {
        let mut j = i + 1;
        while j < values.len() && values[j] - values[j - 1] <= 1e-12 * (1.0 + values[j].abs()) {
            j += 1;
        }
        let mean = values[i..j].iter().sum::<f64>() / (j - i) as f64;
        out[i..j].iter_mut().for_each(|x| *x = mean);
        i = j;
    }
    out
}

/// `f(s)`.
pub fn apply_unary(s: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let e = HermEigen::new(s)?;
    let vals = clustered(&e.values);
    let tmp = HermEigen {
        values: vals,
        vectors: e.vectors,
    };
    Ok(tmp.apply(f))
}

/// `F(s)φ`: each slice coefficient in the joint eigenbasis of `(s_ha, s_ta)`
/// is scaled by `F(λ_{ha,j}, λ_{ta,i})`; twist index untouched.
pub fn apply_bivariate(rep: &TwistedRep, s: &[CMatrix], f: impl Fn(f64, f64) -> f64) -> Result<Vec<Vec<CMatrix>>> {
    let eig: Vec<(Vec<f64>, CMatrix)> = s
        .iter()
        .map(|m| HermEigen::new(m).map(|e| (clustered(&e.values), e.vectors)))
        .collect::<Result<_>>()?;
    let q = rep.quiver();
    Ok(q.arrows()
        .iter()
        .enumerate()
        .map(|(a, ar)| {
            let (lh, uh) = &eig[ar.head];
            let (lt, ut) = &eig[ar.tail];
            rep.slices(a)
                .iter()
                .map(|phi| {
                    let mut hat = uh.adjoint() * phi * ut;
                    for j in 0..hat.nrows() {
                        for i in 0..hat.ncols() {
                            hat[(j, i)] *= f(lh[j], lt[i]);
                        }
                    }
                    uh * hat * ut.adjoint()
                })
                .collect()
        })
        .collect())
}
