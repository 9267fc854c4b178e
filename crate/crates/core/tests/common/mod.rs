#![allow(dead_code)]

use quiverforge::linalg::{self, CMatrix};
use quiverforge::{Complex64, Quiver, StabilityParams, TwistedRep};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| Complex64::new(gauss(rng), gauss(rng)))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    linalg::hermitian_part(&random_matrix(rng, n, n))
}

pub fn scalar(x: f64) -> CMatrix {
    linalg::real_matrix(1, 1, &[x])
}

/// Random untwisted representation on a quiver with 2 or 3 vertices.
pub fn random_rep(rng: &mut ChaCha8Rng, max_dim: usize) -> TwistedRep {
    let nv = rng.random_range(2..=3);
    let vs: Vec<String> = (0..nv).map(|v| format!("v{v}")).collect();
    let na = rng.random_range(1..=3);
    let arrows: Vec<(String, String, String)> = (0..na)
        .map(|a| {
            let t = rng.random_range(0..nv);
            let mut h = rng.random_range(0..nv);
            if h == t && rng.random_bool(0.7) {
                h = (t + 1) % nv;
            }
            (format!("a{a}"), vs[t].clone(), vs[h].clone())
        })
        .collect();
    let q = Quiver::new(&vs, &arrows).unwrap();
    let dims: Vec<usize> = (0..nv).map(|_| rng.random_range(1..=max_dim)).collect();
    let maps = q
        .arrows()
        .iter()
        .map(|ar| random_matrix(rng, dims[ar.head], dims[ar.tail]))
        .collect();
    TwistedRep::untwisted(q, dims, maps).unwrap()
}

/// Random `τ` with `Σ_v τ_v dim_v = 0`.
pub fn admissible_tau(rng: &mut ChaCha8Rng, dims: &[usize]) -> Vec<f64> {
    let r: Vec<f64> = dims.iter().map(|_| gauss(rng)).collect();
    let c = r.iter().zip(dims).map(|(x, &n)| x * n as f64).sum::<f64>() / dims.iter().sum::<usize>() as f64;
    r.iter().map(|x| x - c).collect()
}

pub fn ones(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

pub fn params(sigma: Vec<f64>, tau: Vec<f64>) -> StabilityParams {
    StabilityParams::new(sigma, tau).unwrap()
}

pub fn kronecker(phi: Complex64) -> TwistedRep {
    let m = CMatrix::from_element(1, 1, phi);
    TwistedRep::untwisted(quiverforge::gallery::kronecker(), vec![1, 1], vec![m]).unwrap()
}

pub fn jordan() -> TwistedRep {
    let m = linalg::real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    TwistedRep::untwisted(quiverforge::gallery::jordan_loop(), vec![2], vec![m]).unwrap()
}

/// Generalized Kronecker with two arrows, dims (1,1), slices `(x, y)`.
pub fn kronecker2(x: f64, y: f64) -> TwistedRep {
    TwistedRep::untwisted(
        quiverforge::gallery::generalized_kronecker(2),
        vec![1, 1],
        vec![scalar(x), scalar(y)],
    )
    .unwrap()
}
