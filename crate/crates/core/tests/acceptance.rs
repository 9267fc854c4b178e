//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::*;
use num_complex::Complex64;
use quiverforge::linalg::{self, CMatrix};
use quiverforge::moment::{balanced_frame, kempf_ness_relative, second_variation};
use quiverforge::quiver::PathAlgebraElement;
use quiverforge::rep::{self, check_relations, closure, direct_sum, tensor_product, SubrepWitness};
use quiverforge::stability::{subrep_degree_identity, ExtractOptions, OracleOptions};
use quiverforge::torus::{flat_case_reduce, residual_integral, sup_norm, vortex_residual, ymh_identity};
use quiverforge::*;
use rand::Rng;

type Outcome = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn metric(report: &FlowReport) -> Vec<CMatrix> {
    report.final_metric.metric().unwrap()
}

fn c1_kronecker_dichotomy() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for phi in [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(2.0, 1.0),
    ] {
        for sigma2 in [1.0, 3.0] {
            for t in [-2.0, -0.5, 0.0, 0.3, 1.0, 4.0] {
                let rep = kronecker(phi);
                let p = params(vec![1.0, sigma2], vec![-t, t]);
                let r = flow_solve(&rep, &p, &FlowOptions::default()).map_err(|e| e.to_string())?;
                let converged = r.status == FlowStatus::Converged;
                ensure(converged == (t > 0.0), || {
                    format!("phi={phi} t={t}: status {:?}", r.status)
                })?;
                if t > 0.0 {
                    ensure(r.residual_norm <= 1e-10, || {
                        format!("t={t}: residual {:e}", r.residual_norm)
                    })?;
                    let h = metric(&r);
                    let ratio = h[1][(0, 0)].re / h[0][(0, 0)].re;
                    let err = (ratio - t / phi.norm_sqr()).abs();
                    worst_ratio = worst_ratio.max(err);
                    worst_res = worst_res.max(r.residual_norm);
                    ensure(err <= 1e-8, || format!("t={t}: ratio error {err:e}"))?;
                }
                if t < 0.0 {
                    ensure(r.status == FlowStatus::Diverged, || {
                        format!("t={t}: status {:?}", r.status)
                    })?;
                    let f =
                        destabilizer_extract(&rep, &r, &p, &ExtractOptions::default()).map_err(|e| e.to_string())?;
                    let w = &f[0].witness;
                    ensure(w.dims() == vec![0, 1], || format!("t={t}: witness dims {:?}", w.dims()))?;
                    let want = t.abs() / sigma2;
                    ensure((f[0].slope - want).abs() <= 1e-12, || {
                        format!("t={t}: slope {} vs {want}", f[0].slope)
                    })?;
                }
            }
        }
    }
    Ok(format!(
        "max ratio error {worst_ratio:.1e}, max residual {worst_res:.1e}"
    ))
}

fn c2_jordan() -> Outcome {
    let rep = jordan();
    let p = params(vec![1.0], vec![0.0]);
    let r = flow_solve(&rep, &p, &FlowOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.status == FlowStatus::Diverged, || format!("status {:?}", r.status))?;
    let f = destabilizer_extract(&rep, &r, &p, &ExtractOptions::default()).map_err(|e| e.to_string())?;
    let e1 = linalg::real_matrix(2, 1, &[1.0, 0.0]);
    let angle = linalg::subspace_angle(&f[0].witness.bases[0], &e1);
    ensure(f[0].witness.dims() == vec![1] && angle <= 1e-6, || {
        format!("angle {angle:e}")
    })?;
    let v = stability_oracle(&rep, &p, &OracleOptions::default()).map_err(|e| e.to_string())?;
    ensure(v.tag == VerdictTag::StrictlySemistable, || {
        format!("oracle verdict {:?}", v.tag)
    })?;
    Ok(format!("diverged after {} iterations, angle {angle:.1e}", r.iterations))
}

/// `H₂ = ⊕_j λ_j H₁|_j` with one positive scalar per summand; returns the deviation.
fn summand_scalars_deviation(h1: &[CMatrix], h2: &[CMatrix], k: usize) -> f64 {
    let m: Vec<CMatrix> = h1
        .iter()
        .zip(h2)
        .map(|(a, b)| linalg::pd_roots(a).unwrap().inv * b)
        .collect();
    let mut dev: f64 = 0.0;
    for j in 0..k {
        let lambda = m[0][(j, j)].re;
        if lambda <= 0.0 {
            return f64::INFINITY;
        }
        for mv in &m {
            for i in 0..k {
                let want = if i == j { lambda } else { 0.0 };
                dev = dev.max((mv[(i, j)] - Complex64::new(want, 0.0)).norm() / lambda);
            }
        }
    }
    dev
}

fn c3_polystable_sums() -> Outcome {
    let summands = [kronecker2(1.0, 0.0), kronecker2(0.0, 1.0), kronecker2(1.0, 1.0)];
    let mut worst: f64 = 0.0;
    for (k, t) in [(2, 1.0), (3, 1.0), (3, 2.5)] {
        let mut rep = summands[0].clone();
        for s in &summands[1..k] {
            rep = direct_sum(&rep, s).map_err(|e| e.to_string())?;
        }
        let p = params(vec![1.0, 1.0], vec![-t, t]);
        let mut metrics = Vec::new();
        for seed in [11, 29] {
            let opts = FlowOptions {
                seed,
                init_scale: 0.5,
                ..FlowOptions::default()
            };
            let r = flow_solve(&rep, &p, &opts).map_err(|e| e.to_string())?;
            ensure(r.status == FlowStatus::Converged && r.residual_norm <= 1e-10, || {
                format!("k={k} seed={seed}: {:?} residual {:e}", r.status, r.residual_norm)
            })?;
            metrics.push(metric(&r));
        }
        let dev = summand_scalars_deviation(&metrics[0], &metrics[1], k);
        worst = worst.max(dev);
        ensure(dev <= 1e-8, || {
            format!("k={k}: metrics differ beyond per-summand scalars ({dev:e})")
        })?;
    }
    Ok(format!("max per-summand scalar deviation {worst:.1e}"))
}

fn sigma_for(n: usize, set: usize) -> Vec<f64> {
    let base: [&[f64]; 3] = [&[1.0, 1.0], &[2.0, 3.0], &[5.0, 1.0]];
    (0..n).map(|v| base[set][v % 2] + (v / 2) as f64).collect()
}

fn c4_sigma_invariance() -> Outcome {
    let mut rng = rng(4);
    let mut tally = [0usize; 3];
    for inst in 0..100 {
        let rep = random_rep(&mut rng, 3);
        let tau = admissible_tau(&mut rng, rep.dims());
        let nv = rep.dims().len();
        let mut seen = Vec::new();
        for set in 0..3 {
            let p = params(sigma_for(nv, set), tau.clone());
            let v = stability_oracle(&rep, &p, &OracleOptions::default()).map_err(|e| e.to_string())?;
            let f = flow_solve(&rep, &p, &FlowOptions::default()).map_err(|e| e.to_string())?;
            seen.push((v.tag, f.status));
        }
        ensure(seen.iter().all(|x| *x == seen[0]), || {
            format!("instance {inst}: {seen:?}")
        })?;
        tally[match seen[0].1 {
            FlowStatus::Converged => 0,
            FlowStatus::Diverged => 1,
            FlowStatus::MaxIter => 2,
        }] += 1;
    }
    Ok(format!(
        "100 instances x 3 sigmas; converged {}, diverged {}, max-iter {}",
        tally[0], tally[1], tally[2]
    ))
}

fn random_direction(rng: &mut rand_chacha::ChaCha8Rng, dims: &[usize]) -> Vec<CMatrix> {
    dims.iter().map(|&n| random_hermitian(rng, n)).collect()
}

fn c5_gradient_convexity() -> Outcome {
    let mut rng = rng(5);
    let mut worst_rel: f64 = 0.0;
    let mut worst_second = f64::INFINITY;
    for inst in 0..50 {
        let rep = random_rep(&mut rng, 3);
        let p = params(ones(rep.dims().len()), admissible_tau(&mut rng, rep.dims()));
        let s: Vec<CMatrix> = rep
            .dims()
            .iter()
            .map(|&n| random_hermitian(&mut rng, n) * Complex64::new(0.3, 0.0))
            .collect();
        let base = MetricState { s: s.clone() };
        let h = base.metric().unwrap();
        let roots: Vec<_> = h.iter().map(|x| linalg::pd_roots(x).unwrap()).collect();
        let x = random_direction(&mut rng, rep.dims());
        // `s' = H^{-1/2} X H^{1/2}` is H-selfadjoint.
        let s_rel: Vec<CMatrix> = x.iter().zip(&roots).map(|(xv, r)| &r.inv_sqrt * xv * &r.sqrt).collect();
        let scaled = |c: f64| -> Vec<CMatrix> { s_rel.iter().map(|m| m * Complex64::new(c, 0.0)).collect() };
        let eps = 1e-5;
        let fp = kempf_ness_relative(&rep, &base, &scaled(eps), &p).map_err(|e| e.to_string())?;
        let fm = kempf_ness_relative(&rep, &base, &scaled(-eps), &p).map_err(|e| e.to_string())?;
        let fd = (fp - fm) / (2.0 * eps);
        let m = kempf_ness_gradient(&rep, &s, &p).map_err(|e| e.to_string())?;
        let g: f64 = m.iter().zip(&s_rel).map(|(a, b)| (a * b).trace().re).sum();
        let rel = (fd - g).abs() / g.abs();
        worst_rel = worst_rel.max(rel);
        ensure(rel <= 1e-6, || {
            format!("instance {inst}: gradient {g} vs fd {fd} (rel {rel:e})")
        })?;

        let y = random_direction(&mut rng, rep.dims());
        let y_rel: Vec<CMatrix> = y.iter().zip(&roots).map(|(yv, r)| &r.inv_sqrt * yv * &r.sqrt).collect();
        let e2 = 1e-3;
        let along = |c: f64| -> Vec<CMatrix> { y_rel.iter().map(|m| m * Complex64::new(c, 0.0)).collect() };
        let m0 = kempf_ness_relative(&rep, &base, &along(0.0), &p).map_err(|e| e.to_string())?;
        let mp = kempf_ness_relative(&rep, &base, &along(e2), &p).map_err(|e| e.to_string())?;
        let mm = kempf_ness_relative(&rep, &base, &along(-e2), &p).map_err(|e| e.to_string())?;
        let second = mp + mm - 2.0 * m0;
        worst_second = worst_second.min(second);
        ensure(second >= -1e-9, || {
            format!("instance {inst}: second difference {second:e}")
        })?;
        // Compare the curvature with the closed-form second variation.
        let exact = second_variation(&rep, &h, &y_rel).map_err(|e| e.to_string())? * e2 * e2;
        ensure(
            (second - exact).abs() <= 1e-7 * (1.0 + exact.abs()).max(m0.abs()),
            || format!("instance {inst}: second difference {second:e} vs {exact:e}"),
        )?;
    }
    Ok(format!(
        "max gradient rel error {worst_rel:.1e}, min second difference {worst_second:.1e}"
    ))
}

fn c6_scaling_covariance() -> Outcome {
    let mut rng = rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rep = random_rep(&mut rng, 3);
        let nv = rep.dims().len();
        let sigma: Vec<f64> = (0..nv).map(|_| rng.random_range(0.5..3.0)).collect();
        let p = params(sigma, admissible_tau(&mut rng, rep.dims()));
        let h = MetricState {
            s: random_direction(&mut rng, rep.dims()),
        }
        .metric()
        .unwrap();
        let m = moment_map(&rep, &h, &p).map_err(|e| e.to_string())?;
        for c in [0.5, 2.0, 10.0] {
            let (pc, f) = stability::reparameterize(&p, c, 0.0).map_err(|e| e.to_string())?;
            let mc = moment_map(&rep.scaled(f), &h, &pc).map_err(|e| e.to_string())?;
            for (a, b) in mc.iter().zip(&m) {
                let err = linalg::frob_norm(&(a - b * Complex64::new(c, 0.0))) / (1.0 + linalg::frob_norm(b) * c);
                worst = worst.max(err);
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max relative deviation {worst:e}"))?;
    Ok(format!("max relative deviation {worst:.1e}"))
}

fn solved(rep: &TwistedRep, p: &StabilityParams) -> std::result::Result<FlowReport, String> {
    let r = flow_solve(rep, p, &FlowOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.status == FlowStatus::Converged, || {
        format!("instance did not converge: {:?}", r.status)
    })?;
    Ok(r)
}

fn c7_degree_identity() -> Outcome {
    let mut cases: Vec<(TwistedRep, StabilityParams, SubrepWitness)> = Vec::new();
    let k = kronecker(Complex64::new(1.0, 0.0));
    let w = SubrepWitness {
        bases: vec![CMatrix::zeros(1, 0), linalg::identity(1)],
    };
    cases.push((
        k.clone(),
        params(vec![1.0, 1.0], vec![-1.0, 1.0]),
        SubrepWitness::full(&k),
    ));
    cases.push((k, params(vec![1.0, 1.0], vec![-1.0, 1.0]), w));

    let sum = direct_sum(&kronecker2(1.0, 0.0), &kronecker2(1.0, 1.0)).unwrap();
    let e0 = linalg::real_matrix(2, 1, &[1.0, 0.0]);
    let w = SubrepWitness {
        bases: vec![e0.clone(), e0],
    };
    cases.push((sum, params(vec![1.0, 2.0], vec![-1.5, 1.5]), w));

    let mut rng = rng(7);
    for _ in 0..5 {
        let q = gallery::generalized_kronecker(2);
        let rep = TwistedRep::untwisted(
            q,
            vec![2, 2],
            vec![random_matrix(&mut rng, 2, 2), random_matrix(&mut rng, 2, 2)],
        )
        .unwrap();
        let t = rng.random_range(0.3..2.0);
        let p = params(vec![1.0, rng.random_range(0.5..2.0)], vec![-t, t]);
        let u = random_matrix(&mut rng, 2, 1);
        let gen_u = closure(&rep, &[u, CMatrix::zeros(2, 0)], 1e-10);
        let gen_v = closure(&rep, &[CMatrix::zeros(2, 0), random_matrix(&mut rng, 2, 1)], 1e-10);
        cases.push((rep.clone(), p.clone(), gen_u));
        cases.push((rep, p, gen_v));
    }
    let mut worst: f64 = 0.0;
    for (i, (rep, p, w)) in cases.iter().enumerate() {
        let chk = rep::check_subrep(rep, w, 1e-9).map_err(|e| e.to_string())?;
        ensure(chk.invariant, || format!("case {i}: witness not invariant"))?;
        let r = solved(rep, p)?;
        let err = subrep_degree_identity(rep, &r.final_metric, w, p).map_err(|e| e.to_string())?;
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("case {i}: identity mismatch {err:e}"))?;
    }
    Ok(format!("{} cases, max mismatch {worst:.1e}", cases.len()))
}

fn c8_tensor() -> Outcome {
    let mut rng = rng(8);
    let q = gallery::generalized_kronecker(2);
    let r2 = TwistedRep::untwisted(
        q,
        vec![2, 2],
        vec![random_matrix(&mut rng, 2, 2), random_matrix(&mut rng, 2, 2)],
    )
    .unwrap();
    let r2k = TwistedRep::untwisted(
        gallery::generalized_kronecker(2),
        vec![1, 1],
        vec![scalar(0.7), scalar(-1.3)],
    )
    .unwrap();
    let upq = TwistedRep::untwisted(gallery::upq(), vec![1, 1], vec![scalar(1.5), scalar(0.4)]).unwrap();
    let pairs = [
        (
            kronecker(Complex64::new(1.0, 0.0)),
            vec![-1.0, 1.0],
            kronecker(Complex64::new(1.0, 0.0)),
            vec![-2.0, 2.0],
        ),
        (
            r2,
            vec![-1.0, 1.0],
            kronecker(Complex64::new(0.5, 0.5)),
            vec![-0.5, 0.5],
        ),
        (r2k, vec![-0.7, 0.7], upq, vec![0.8, -0.8]),
    ];
    let mut worst: f64 = 0.0;
    for (i, (r, tau, s, tau2)) in pairs.iter().enumerate() {
        let p = params(ones(2), tau.clone());
        let p2 = params(ones(2), tau2.clone());
        let (fr, fs) = (solved(r, &p)?, solved(s, &p2)?);
        let br = balanced_frame(r, &metric(&fr)).map_err(|e| e.to_string())?;
        let bs = balanced_frame(s, &metric(&fs)).map_err(|e| e.to_string())?;
        let prod = tensor_product(&br, &bs).map_err(|e| e.to_string())?;
        let tau3: Vec<f64> = tau.iter().zip(tau2).map(|(a, b)| a + b).collect();
        let p3 = params(ones(2), tau3);
        // H ⊗ H' is the identity in the product of balanced frames.
        let h: Vec<CMatrix> = prod.dims().iter().map(|&n| linalg::identity(n)).collect();
        let res = residual_norm(&moment_map(&prod, &h, &p3).map_err(|e| e.to_string())?);
        worst = worst.max(res);
        ensure(res <= 1e-8, || format!("pair {i}: product residual {res:e}"))?;
    }
    Ok(format!("3 pairs, max product residual {worst:.1e} (balanced frames)"))
}

fn two_vertex_system(n: usize, t: f64, w: WeightField) -> std::result::Result<TorusSystem, String> {
    TorusSystem::from_fields(gallery::kronecker(), vec![0, 0], &[w], params(ones(2), vec![-t, t]), n)
        .map_err(|e| e.to_string())
}

fn c9_torus() -> Outcome {
    let opts = VortexOptions::default();
    let (t, c) = (1.7, 0.6);
    let sys = two_vertex_system(64, t, WeightField::Constant { value: c })?;
    let tight = VortexOptions {
        tol: 1e-12,
        ..VortexOptions::default()
    };
    let sol = solve_vortex(&sys, &tight).map_err(|e| e.to_string())?;
    let half = 0.25 * (t / c).ln();
    let mut closed: f64 = 0.0;
    for (u, want) in sol.state.u.iter().zip([-half, half]) {
        closed = closed.max(u.iter().map(|x| (x - want).abs()).fold(0.0, f64::max));
    }
    ensure(closed <= 1e-10, || format!("closed form error {closed:e}"))?;

    let bump = WeightField::Bump {
        base: 0.2,
        amplitude: 1.5,
        kappa: 2.0,
        x0: 0.3,
        y0: 0.6,
    };
    let coarse_sys = two_vertex_system(64, 1.0, bump.clone())?;
    let coarse = solve_vortex(&coarse_sys, &opts).map_err(|e| e.to_string())?;
    let iters = coarse.history.len() - 1;
    ensure(iters <= 20 && coarse.sup_residual <= 1e-8, || {
        format!("bump: {iters} iterations, sup residual {:e}", coarse.sup_residual)
    })?;
    let integral = coarse
        .history
        .iter()
        .map(|h| (h.residual_integral - coarse_sys.defect()).abs())
        .fold(0.0, f64::max);
    ensure(integral <= 1e-10, || format!("integral identity error {integral:e}"))?;
    let check = residual_integral(&vortex_residual(&coarse_sys, &coarse.state).map_err(|e| e.to_string())?);
    ensure(check.abs() <= 1e-10, || format!("final integral {check:e}"))?;

    let fine_sys = two_vertex_system(128, 1.0, bump)?;
    let fine = solve_vortex(&fine_sys, &opts).map_err(|e| e.to_string())?;
    let mut diff: f64 = 0.0;
    for v in 0..2 {
        for i in 0..64 {
            for j in 0..64 {
                diff = diff.max((coarse.state.u[v][i * 64 + j] - fine.state.u[v][(2 * i) * 128 + 2 * j]).abs());
            }
        }
    }
    ensure(diff <= 1e-5, || format!("refinement difference {diff:e}"))?;
    Ok(format!(
        "closed form {closed:.1e}; bump {iters} Newton steps, sup residual {:.1e}; integral {integral:.1e}; 64->128 {diff:.1e}",
        sup_norm(&vortex_residual(&coarse_sys, &coarse.state).unwrap())
    ))
}

fn c10_flat_case() -> Outcome {
    let c = |value| WeightField::Constant { value };
    let systems = [
        (gallery::kronecker(), vec![c(0.6)], vec![1.0, 1.0], vec![-1.7, 1.7]),
        (gallery::kronecker(), vec![c(2.0)], vec![1.0, 3.0], vec![-0.4, 0.4]),
        (gallery::upq(), vec![c(1.3), c(0.5)], vec![2.0, 1.0], vec![0.9, -0.9]),
        (
            gallery::chain(2),
            vec![c(1.0), c(0.7)],
            vec![1.0, 1.0, 2.0],
            vec![-1.0, 0.25, 0.75],
        ),
        (
            gallery::generalized_kronecker(2),
            vec![c(0.3), c(0.9)],
            vec![1.5, 0.5],
            vec![-0.8, 0.8],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (i, (q, w, sigma, tau)) in systems.into_iter().enumerate() {
        let sys =
            TorusSystem::from_fields(q, vec![0; sigma.len()], &w, params(sigma, tau), 32).map_err(|e| e.to_string())?;
        let cmp =
            flat_case_reduce(&sys, &FlowOptions::default(), &VortexOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max(cmp.sup_difference);
        ensure(cmp.sup_difference <= 1e-8, || {
            format!("system {i}: sup difference {:e}", cmp.sup_difference)
        })?;
    }
    Ok(format!("5 systems, max sup difference {worst:.1e}"))
}

fn smooth_field(rng: &mut rand_chacha::ChaCha8Rng, grid: &TorusGrid, amp: f64) -> Vec<Complex64> {
    let modes: Vec<(f64, f64, Complex64)> = (0..6)
        .map(|_| {
            let p = rng.random_range(-3..=3) as f64;
            let q = rng.random_range(-3..=3) as f64;
            (p, q, Complex64::new(gauss(rng), gauss(rng)) * amp)
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let (x, y) = grid.coords(i);
            modes
                .iter()
                .map(|(p, q, a)| a * Complex64::from_polar(1.0, 2.0 * PI * (p * x + q * y)))
                .sum()
        })
        .collect()
}

fn c11_ymh() -> Outcome {
    let mut rng = rng(11);
    let mut worst: f64 = 0.0;
    let cases: [(Quiver, Vec<i64>); 3] = [
        (gallery::kronecker(), vec![0, 0]),
        (gallery::upq(), vec![1, 1]),
        (gallery::chain(2), vec![2, 2, 2]),
    ];
    for (i, (q, degrees)) in cases.into_iter().enumerate() {
        for _ in 0..2 {
            let nv = q.vertex_count();
            let sigma: Vec<f64> = (0..nv).map(|_| rng.random_range(0.5..2.0)).collect();
            // Admissible tau: Σ τ_v = 2π Σ σ_v d_v.
            let mut tau: Vec<f64> = (0..nv).map(|_| gauss(&mut rng)).collect();
            let target: f64 = sigma.iter().zip(&degrees).map(|(s, &d)| 2.0 * PI * s * d as f64).sum();
            let shift = (target - tau.iter().sum::<f64>()) / nv as f64;
            tau.iter_mut().for_each(|t| *t += shift);
            let fields = vec![WeightField::Constant { value: 1.0 }; q.arrow_count()];
            let sys = TorusSystem::from_fields(q.clone(), degrees.clone(), &fields, params(sigma.clone(), tau), 128)
                .map_err(|e| e.to_string())?;
            let u = PotentialState {
                u: (0..nv)
                    .map(|_| smooth_field(&mut rng, &sys.grid, 0.15).iter().map(|z| z.re).collect())
                    .collect(),
            }
            .gauge_projected(&sigma);
            let phi: Vec<Option<Vec<Complex64>>> = (0..q.arrow_count())
                .map(|_| Some(smooth_field(&mut rng, &sys.grid, 0.4)))
                .collect();
            let r = ymh_identity(&sys, &u, &phi).map_err(|e| e.to_string())?;
            worst = worst.max(r.mismatch);
            ensure(r.mismatch <= 1e-6, || {
                format!("case {i}: lhs {} rhs {} mismatch {:e}", r.lhs, r.rhs, r.mismatch)
            })?;
        }
    }
    Ok(format!(
        "6 random instances on 128x128, max relative mismatch {worst:.1e}"
    ))
}

fn c12_algebra() -> Outcome {
    let quivers = [
        gallery::kronecker(),
        gallery::generalized_kronecker(3),
        gallery::chain(4),
        gallery::grid_p2(2),
        gallery::grid_p1p1(1),
    ];
    let mut triples = 0usize;
    for q in &quivers {
        let alg = PathAlgebra::new(q, 6);
        let basis = alg.basis();
        let el: Vec<PathAlgebraElement> = basis.iter().cloned().map(PathAlgebraElement::basis).collect();
        let unit = alg.unit();
        for x in &el {
            ensure(
                alg.product(&unit, x).unwrap() == *x && alg.product(x, &unit).unwrap() == *x,
                || "unit law failed".into(),
            )?;
            for y in &el {
                let xy = alg.product(x, y).map_err(|e| e.to_string())?;
                for z in &el {
                    let l = alg.product(&xy, z).map_err(|e| e.to_string())?;
                    let r = alg
                        .product(x, &alg.product(y, z).map_err(|e| e.to_string())?)
                        .map_err(|e| e.to_string())?;
                    ensure(l == r, || "associativity failed".into())?;
                    triples += 1;
                }
            }
        }
    }

    let mut rng = rng(12);
    for q in [gallery::kronecker(), gallery::chain(3), gallery::grid_p2(2)] {
        let dims: Vec<usize> = (0..q.vertex_count()).map(|_| rng.random_range(0..=3)).collect();
        let maps = q
            .arrows()
            .iter()
            .map(|ar| random_matrix(&mut rng, dims[ar.head], dims[ar.tail]))
            .collect();
        let r = TwistedRep::untwisted(q, dims, maps).unwrap();
        let back = rep::from_module(&rep::to_module(&r, 6).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(back == r, || "module round trip differs".into())?;
    }

    let q = gallery::grid_p2(3);
    let rels = gallery::grid_relations(&q);
    let diag = |a: f64, b: f64| linalg::real_matrix(2, 2, &[a, 0.0, 0.0, b]);
    let maps: Vec<CMatrix> = q
        .arrows()
        .iter()
        .map(|ar| {
            if ar.name.starts_with("a1") {
                diag(1.5, -0.5)
            } else {
                diag(2.0, 3.0)
            }
        })
        .collect();
    let good = TwistedRep::untwisted(q.clone(), vec![2; q.vertex_count()], maps.clone()).unwrap();
    let res = check_relations(&good, &rels, 0.0).map_err(|e| e.to_string())?;
    ensure(res.iter().all(|r| r.residual == 0.0), || {
        "commuting data has nonzero residual".into()
    })?;
    let mut bad = maps;
    for (a, ar) in q.arrows().iter().enumerate() {
        if ar.name.starts_with("a1") {
            bad[a][(0, 1)] = Complex64::new(1.0, 0.0);
        }
    }
    let bad = TwistedRep::untwisted(q, vec![2; good.dims().len()], bad).unwrap();
    let res = check_relations(&bad, &rels, 1e-12).map_err(|e| e.to_string())?;
    let min = res.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    ensure(min > 0.1, || format!("perturbed data residual {min}"))?;
    Ok(format!(
        "{triples} basis triples exact; {} relations zero on commuting data, min perturbed residual {min}",
        rels.len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("1 Kronecker dichotomy", c1_kronecker_dichotomy),
        ("2 Jordan nilpotent", c2_jordan),
        ("3 polystable sums", c3_polystable_sums),
        ("4 sigma invariance", c4_sigma_invariance),
        ("5 gradient and convexity", c5_gradient_convexity),
        ("6 scaling covariance", c6_scaling_covariance),
        ("7 subrep degree identity", c7_degree_identity),
        ("8 tensor product metric", c8_tensor),
        ("9 torus solver", c9_torus),
        ("10 flat-case reduction", c10_flat_case),
        ("11 YMH identity", c11_ymh),
        ("12 algebra layer", c12_algebra),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
