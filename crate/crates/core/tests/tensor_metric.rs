mod common;

use common::*;
use quiverforge::linalg::{self, CMatrix};
use quiverforge::moment::balanced_frame;
use quiverforge::rep::tensor_product;
use quiverforge::{flow_solve, moment_map, residual_norm, Complex64, FlowOptions, FlowStatus};

fn solve(r: &quiverforge::TwistedRep, tau: Vec<f64>) -> Vec<CMatrix> {
    let f = flow_solve(r, &params(ones(2), tau), &FlowOptions::default()).unwrap();
    assert_eq!(f.status, FlowStatus::Converged);
    f.final_metric.metric().unwrap()
}

#[test]
fn literal_frame_product_fails() {
    let r = kronecker(Complex64::new(1.0, 0.0));
    let h = solve(&r, vec![-1.0, 1.0]);
    let hp = solve(&r, vec![-2.0, 2.0]);
    let prod = tensor_product(&r, &r).unwrap();
    let hh: Vec<CMatrix> = h.iter().zip(&hp).map(|(a, b)| linalg::kron(a, b)).collect();
    let res = residual_norm(&moment_map(&prod, &hh, &params(ones(2), vec![-3.0, 3.0])).unwrap());
    // m = ∓1 at the two vertices: ratio 1·2 against τ″ = 3.
    assert!((res - 2f64.sqrt()).abs() < 1e-8, "{res}");
}

#[test]
fn balanced_frame_product_solves() {
    let r = kronecker(Complex64::new(1.0, 0.0));
    let br = balanced_frame(&r, &solve(&r, vec![-1.0, 1.0])).unwrap();
    let bs = balanced_frame(&r, &solve(&r, vec![-2.0, 2.0])).unwrap();
    assert!((bs.slices(0)[0][(0, 0)].norm() - 2f64.sqrt()).abs() < 1e-8);
    let prod = tensor_product(&br, &bs).unwrap();
    let h: Vec<CMatrix> = prod.dims().iter().map(|&n| linalg::identity(n)).collect();
    let res = residual_norm(&moment_map(&prod, &h, &params(ones(2), vec![-3.0, 3.0])).unwrap());
    assert!(res < 1e-8, "{res}");
}
