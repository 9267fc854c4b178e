use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::grid::TorusGrid;
use super::system::{arrow_terms, residual_integral, residual_unchecked, sup_norm, PotentialState, TorusSystem};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct VortexOptions {
    pub tol: f64,
    pub max_newton: usize,
    pub cg_tol: f64,
    pub cg_max: usize,
}

impl Default for VortexOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_newton: 30,
            cg_tol: 1e-13,
            cg_max: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonRecord {
    pub iter: usize,
    pub sup_residual: f64,
    pub damping: f64,
    /// `Σ_v ∫ residual_v` at this iterate.
    pub residual_integral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VortexSolution {
    pub state: PotentialState,
    pub sup_residual: f64,
    pub history: Vec<NewtonRecord>,
}

/// Linearization `J δ = σ_v Δδ_v + Σ_a 2T_a(δ_ha − δ_ta)([h(a)=v] − [t(a)=v])`.
struct Linearization<'a> {
    system: &'a TorusSystem,
    terms: Vec<Vec<f64>>,
    /// Per distinct `p² + q²`, the pseudo-inverse of `σ|k|² + C̄`.
    precond: BTreeMap<i64, DMatrix<f64>>,
}

impl<'a> Linearization<'a> {
    fn new(system: &'a TorusSystem, state: &PotentialState) -> Self {
        let terms = arrow_terms(system, state);
        let nv = system.vertex_count();
        let mut cbar = DMatrix::<f64>::zeros(nv, nv);
        for (a, ar) in system.quiver.arrows().iter().enumerate() {
            if ar.head == ar.tail {
                continue;
            }
            let t = 2.0 * TorusGrid::mean(&terms[a]);
            let (h, tl) = (ar.head, ar.tail);
            cbar[(h, h)] += t;
            cbar[(tl, tl)] += t;
            cbar[(h, tl)] -= t;
            cbar[(tl, h)] -= t;
        }
        let g = &system.grid;
        let c = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let mut precond = BTreeMap::new();
        for idx in 0..g.len() {
            let (p, q) = g.frequency(idx);
            let key = p * p + q * q;
            precond.entry(key).or_insert_with(|| {
                let mut m = cbar.clone();
                for v in 0..nv {
                    m[(v, v)] += system.params.sigma[v] * c * key as f64;
                }
                pinv_sym(&m)
            });
        }
        Self { system, terms, precond }
    }

    fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let s = self.system;
        let mut out: Vec<Vec<f64>> = x
            .iter()
            .enumerate()
            .map(|(v, f)| s.grid.laplacian(f).iter().map(|l| s.params.sigma[v] * l).collect())
            .collect();
        for (a, ar) in s.quiver.arrows().iter().enumerate() {
            if ar.head == ar.tail {
                continue;
            }
            for i in 0..s.grid.len() {
                let d = 2.0 * self.terms[a][i] * (x[ar.head][i] - x[ar.tail][i]);
                out[ar.head][i] += d;
                out[ar.tail][i] -= d;
            }
        }
        out
    }

    fn precondition(&self, r: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let g = &self.system.grid;
        let nv = r.len();
        let spec: Vec<Vec<Complex64>> = r.iter().map(|f| g.to_spectral(f)).collect();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); g.len()]; nv];
        for idx in 0..g.len() {
            let (p, q) = g.frequency(idx);
            let m = &self.precond[&(p * p + q * q)];
            for v in 0..nv {
                let mut acc = Complex64::new(0.0, 0.0);
                for w in 0..nv {
                    acc += spec[w][idx] * m[(v, w)];
                }
                out[v][idx] = acc;
            }
        }
        out.into_iter().map(|d| g.from_spectral_real(d)).collect()
    }
}

fn pinv_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let e = m.clone().symmetric_eigen();
    let top = e.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let l = e.eigenvalues[k];
        if l.abs() > 1e-12 * top.max(1e-300) {
            let v: DVector<f64> = e.eigenvectors.column(k).into_owned();
            out += &v * v.transpose() / l;
        }
    }
    out
}

fn dot(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}

/// Removes the component along the global constants.
fn deflate(x: &mut [Vec<f64>]) {
    let n: usize = x.iter().map(Vec::len).sum();
    let m = x.iter().flatten().sum::<f64>() / n as f64;
    x.iter_mut().flatten().for_each(|v| *v -= m);
}

/// Preconditioned conjugate gradients on the complement of the constants.
fn pcg(lin: &Linearization, b: &[Vec<f64>], tol: f64, max_iter: usize) -> Vec<Vec<f64>> {
    let mut b = b.to_vec();
    deflate(&mut b);
    let bn = dot(&b, &b).sqrt();
    let mut x: Vec<Vec<f64>> = b.iter().map(|f| vec![0.0; f.len()]).collect();
    if bn == 0.0 {
        return x;
    }
    let mut r = b;
    let mut z = lin.precondition(&r);
    deflate(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = lin.apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for (xv, pv) in x.iter_mut().zip(&p) {
            xv.iter_mut().zip(pv).for_each(|(a, b)| *a += alpha * b);
        }
        for (rv, av) in r.iter_mut().zip(&ap) {
            rv.iter_mut().zip(av).for_each(|(a, b)| *a -= alpha * b);
        }
        if dot(&r, &r).sqrt() <= tol * bn {
            break;
        }
        z = lin.precondition(&r);
        deflate(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pv, zv) in p.iter_mut().zip(&z) {
            pv.iter_mut().zip(zv).for_each(|(a, b)| *a = b + beta * *a);
        }
    }
    x
}

/// Damped Newton on the gauge-fixed potentials. Stalls surface as
/// `Error::NewtonStall` carrying the best state and the history.
pub fn solve_vortex(system: &TorusSystem, opts: &VortexOptions) -> Result<VortexSolution> {
    let sigma = &system.params.sigma;
    let mut state = PotentialState::zero(system);
    let mut r = residual_unchecked(system, &state);
    let mut sup = sup_norm(&r);
    let mut history = vec![NewtonRecord {
        iter: 0,
        sup_residual: sup,
        damping: 0.0,
        residual_integral: residual_integral(&r),
    }];
    let mut iter = 0;
    while sup > opts.tol {
        if iter >= opts.max_newton {
            return Err(Error::NewtonStall(Box::new(VortexSolution {
                state,
                sup_residual: sup,
                history,
            })));
        }
        iter += 1;
        let lin = Linearization::new(system, &state);
        let rhs: Vec<Vec<f64>> = r.iter().map(|f| f.iter().map(|x| -x).collect()).collect();
        let delta = pcg(&lin, &rhs, opts.cg_tol, opts.cg_max);
        let mut theta = 1.0;
        let accepted = loop {
            let trial = PotentialState {
                u: state
                    .u
                    .iter()
                    .zip(&delta)
                    .map(|(u, d)| u.iter().zip(d).map(|(a, b)| a + theta * b).collect())
                    .collect(),
            }
            .gauge_projected(sigma);
            let tr = residual_unchecked(system, &trial);
            let ts = sup_norm(&tr);
            if ts < sup {
                break Some((trial, tr, ts));
            }
            theta *= 0.5;
            if theta < 2f64.powi(-20) {
                break None;
            }
        };
        let Some((trial, tr, ts)) = accepted else {
            return Err(Error::NewtonStall(Box::new(VortexSolution {
                state,
                sup_residual: sup,
                history,
            })));
        };
        state = trial;
        r = tr;
        sup = ts;
        history.push(NewtonRecord {
            iter,
            sup_residual: sup,
            damping: theta,
            residual_integral: residual_integral(&r),
        });
    }
    Ok(VortexSolution {
        state,
        sup_residual: sup,
        history,
    })
}
