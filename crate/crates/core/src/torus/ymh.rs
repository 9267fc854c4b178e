use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::grid::TorusGrid;
use super::system::{PotentialState, TorusSystem};
use crate::error::{shape, Error, Result};

/// Both sides of the energy-splitting identity on the flat torus (complex
/// dimension one, flat twists, so the `Ch₂` and twist-curvature terms vanish).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YmhReport {
    pub lhs: f64,
    pub rhs: f64,
    pub mismatch: f64,
    pub curvature_term: f64,
    pub higgs_term: f64,
    pub moment_term: f64,
    pub dbar_term: f64,
    pub chern_term: f64,
    pub vortex_term: f64,
}

fn mean_abs_sq(f: &[Complex64]) -> f64 {
    f.iter().map(|z| z.norm_sqr()).sum::<f64>() / f.len() as f64
}

/// `phi[a]` is the field of arrow `a` in the trivialization of `K`; `None` is zero.
///
/// With `f_v = 2πd_v + Δu_v`, `w = u_h − u_t`, `ψ = e^w φ`,
/// `U_v = Σ_{h(a)=v}|ψ_a|² − Σ_{t(a)=v}|ψ_a|²`:
///
/// - lhs = `Σσ‖f‖² + 2Σ_a∫(|ψ_x − i w_y ψ|² + |ψ_y + i w_x ψ|²) + Σσ⁻¹‖U − τ‖²`
/// - rhs = `4Σ_a∫2e^{2w}|∂_z̄ φ|² + 4πΣτ_v d_v + Σσ⁻¹‖σf + U − τ‖²`
pub fn ymh_identity(system: &TorusSystem, state: &PotentialState, phi: &[Option<Vec<Complex64>>]) -> Result<YmhReport> {
    let g = &system.grid;
    let q = &system.quiver;
    let p = &system.params;
    if phi.len() != q.arrow_count() {
        return Err(shape("phi", "one entry per arrow required"));
    }
    let nv = system.vertex_count();
    let f: Vec<Vec<f64>> = (0..nv)
        .map(|v| {
            let f0 = 2.0 * PI * system.degrees[v] as f64;
            g.laplacian(&state.u[v]).iter().map(|l| f0 + l).collect()
        })
        .collect();
    let mut u_field = vec![vec![0.0; g.len()]; nv];
    let mut higgs = 0.0;
    let mut dbar = 0.0;
    for (a, ar) in q.arrows().iter().enumerate() {
        let Some(ph) = &phi[a] else { continue };
        if ph.len() != g.len() {
            return Err(shape(&ar.name, "phi field size differs from grid"));
        }
        if system.degrees[ar.tail] != system.degrees[ar.head] {
            return Err(Error::UnsupportedDegrees { arrow: ar.name.clone() });
        }
        let w: Vec<f64> = state.u[ar.head]
            .iter()
            .zip(&state.u[ar.tail])
            .map(|(h, t)| h - t)
            .collect();
        let psi: Vec<Complex64> = ph.iter().zip(&w).map(|(z, x)| z * x.exp()).collect();
        let (px, py) = g.gradient_complex(&psi);
        let (wx, wy) = g.gradient(&w);
        let i = Complex64::new(0.0, 1.0);
        let dx: Vec<Complex64> = (0..g.len()).map(|k| px[k] - i * wy[k] * psi[k]).collect();
        let dy: Vec<Complex64> = (0..g.len()).map(|k| py[k] + i * wx[k] * psi[k]).collect();
        higgs += 2.0 * (mean_abs_sq(&dx) + mean_abs_sq(&dy));

        let (fx, fy) = g.gradient_complex(ph);
        let dz: Vec<Complex64> = (0..g.len()).map(|k| 0.5 * (fx[k] + i * fy[k]) * (w[k]).exp()).collect();
        dbar += 4.0 * 2.0 * mean_abs_sq(&dz);

        if ar.head != ar.tail {
            for k in 0..g.len() {
                let m = psi[k].norm_sqr();
                u_field[ar.head][k] += m;
                u_field[ar.tail][k] -= m;
            }
        }
    }
    let mut curvature = 0.0;
    let mut moment = 0.0;
    let mut vortex = 0.0;
    let mut chern = 0.0;
    for v in 0..nv {
        let (s, t) = (p.sigma[v], p.tau[v]);
        curvature += s * TorusGrid::mean(&f[v].iter().map(|x| x * x).collect::<Vec<_>>());
        moment += TorusGrid::mean(&u_field[v].iter().map(|x| (x - t).powi(2)).collect::<Vec<_>>()) / s;
        vortex += TorusGrid::mean(
            &f[v]
                .iter()
                .zip(&u_field[v])
                .map(|(fv, uv)| (s * fv + uv - t).powi(2))
                .collect::<Vec<_>>(),
        ) / s;
        chern += 4.0 * PI * t * system.degrees[v] as f64;
    }
    let lhs = curvature + higgs + moment;
    let rhs = dbar + chern + vortex;
    Ok(YmhReport {
        lhs,
        rhs,
        mismatch: (lhs - rhs).abs() / (1.0 + lhs.abs()),
        curvature_term: curvature,
        higgs_term: higgs,
        moment_term: moment,
        dbar_term: dbar,
        chern_term: chern,
        vortex_term: vortex,
    })
}
