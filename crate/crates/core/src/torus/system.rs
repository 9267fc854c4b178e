use std::f64::consts::PI;

use serde::Serialize;

use super::grid::TorusGrid;
use crate::error::{shape, Error, Result};
use crate::quiver::Quiver;
use crate::stability::StabilityParams;

/// Weight generators. Nonconstant fields are synthetic stand-ins for
/// `|section|²` magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightField {
    Constant {
        value: f64,
    },
    /// `base + amplitude·exp(κ(cos 2π(x−x0) + cos 2π(y−y0)) − 2κ)`.
    Bump {
        base: f64,
        amplitude: f64,
        kappa: f64,
        x0: f64,
        y0: f64,
    },
}

impl WeightField {
    pub fn sample(&self, grid: &TorusGrid) -> Vec<f64> {
        match *self {
            WeightField::Constant { value } => vec![value; grid.len()],
            WeightField::Bump {
                base,
                amplitude,
                kappa,
                x0,
                y0,
            } => grid.sample(|x, y| {
                let e = kappa * ((2.0 * PI * (x - x0)).cos() + (2.0 * PI * (y - y0)).cos()) - 2.0 * kappa;
                base + amplitude * e.exp()
            }),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, WeightField::Constant { .. })
    }
}

/// Line-bundle quiver vortex system on the flat unit torus.
#[derive(Debug, Clone)]
pub struct TorusSystem {
    pub quiver: Quiver,
    pub degrees: Vec<i64>,
    /// `w_a = |φ_a|²_{K,q}` sampled on the grid.
    pub weights: Vec<Vec<f64>>,
    pub params: StabilityParams,
    pub grid: TorusGrid,
}

/// `Σ_v σ_v 2π d_v − Σ_v τ_v`.
pub fn admissibility_defect(degrees: &[i64], params: &StabilityParams) -> f64 {
    degrees
        .iter()
        .zip(&params.sigma)
        .zip(&params.tau)
        .map(|((&d, s), t)| 2.0 * PI * s * d as f64 - t)
        .sum()
}

impl TorusSystem {
    pub fn new(
        quiver: Quiver,
        degrees: Vec<i64>,
        weights: Vec<Vec<f64>>,
        params: StabilityParams,
        n: usize,
    ) -> Result<Self> {
        let grid = TorusGrid::new(n)?;
        params.validate(quiver.vertex_count())?;
        if degrees.len() != quiver.vertex_count() {
            return Err(shape("degrees", "one degree per vertex required"));
        }
        if weights.len() != quiver.arrow_count() {
            return Err(shape("weights", "one weight field per arrow required"));
        }
        for (a, w) in weights.iter().enumerate() {
            let name = &quiver.arrow(a).name;
            if w.len() != grid.len() {
                return Err(shape(
                    name,
                    format!("weight field has {} samples, grid has {}", w.len(), grid.len()),
                ));
            }
            if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(shape(name, "weight field must be finite and nonnegative"));
            }
        }
        let defect = admissibility_defect(&degrees, &params);
        let scale = 1.0
            + degrees
                .iter()
                .zip(&params.sigma)
                .map(|(&d, s)| (2.0 * PI * s * d as f64).abs())
                .sum::<f64>()
            + params.tau.iter().map(|t| t.abs()).sum::<f64>();
        if defect.abs() > 1e-10 * scale {
            return Err(Error::InadmissibleParameters { defect });
        }
        Ok(Self {
            quiver,
            degrees,
            weights,
            params,
            grid,
        })
    }

    pub fn from_fields(
        quiver: Quiver,
        degrees: Vec<i64>,
        fields: &[WeightField],
        params: StabilityParams,
        n: usize,
    ) -> Result<Self> {
        let grid = TorusGrid::new(n)?;
        let weights = fields.iter().map(|f| f.sample(&grid)).collect();
        Self::new(quiver, degrees, weights, params, n)
    }

    pub fn vertex_count(&self) -> usize {
        self.quiver.vertex_count()
    }

    pub fn defect(&self) -> f64 {
        admissibility_defect(&self.degrees, &self.params)
    }
}

/// `H_v = K_v e^{2u_v}` per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialState {
    pub u: Vec<Vec<f64>>,
}

impl PotentialState {
    pub fn zero(system: &TorusSystem) -> Self {
        Self {
            u: vec![vec![0.0; system.grid.len()]; system.vertex_count()],
        }
    }

    /// `Σ_v σ_v ∫ u_v`.
    pub fn gauge_defect(&self, sigma: &[f64]) -> f64 {
        self.u.iter().zip(sigma).map(|(u, s)| s * TorusGrid::mean(u)).sum()
    }

    /// Shift along constants so that `Σ_v σ_v ∫ u_v = 0`.
    pub fn gauge_projected(&self, sigma: &[f64]) -> Self {
        let c = self.gauge_defect(sigma) / sigma.iter().sum::<f64>();
        Self {
            u: self.u.iter().map(|u| u.iter().map(|x| x - c).collect()).collect(),
        }
    }
}

/// `T_a = w_a e^{2(u_ha − u_ta)}` per arrow.
pub(crate) fn arrow_terms(system: &TorusSystem, state: &PotentialState) -> Vec<Vec<f64>> {
    system
        .quiver
        .arrows()
        .iter()
        .enumerate()
        .map(|(a, ar)| {
            let (uh, ut) = (&state.u[ar.head], &state.u[ar.tail]);
            system.weights[a]
                .iter()
                .zip(uh.iter().zip(ut))
                .map(|(w, (h, t))| w * (2.0 * (h - t)).exp())
                .collect()
        })
        .collect()
}

pub(crate) fn residual_unchecked(system: &TorusSystem, state: &PotentialState) -> Vec<Vec<f64>> {
    let p = &system.params;
    let mut r: Vec<Vec<f64>> = (0..system.vertex_count())
        .map(|v| {
            let lap = system.grid.laplacian(&state.u[v]);
            let f0 = 2.0 * PI * system.degrees[v] as f64;
            lap.iter().map(|l| p.sigma[v] * (f0 + l) - p.tau[v]).collect()
        })
        .collect();
    for (a, t) in arrow_terms(system, state).iter().enumerate() {
        let ar = system.quiver.arrow(a);
        if ar.head == ar.tail {
            continue;
        }
        for (i, x) in t.iter().enumerate() {
            r[ar.head][i] += x;
            r[ar.tail][i] -= x;
        }
    }
    r
}

/// `σ_v(2πd_v + Δu_v) + Σ_{h(a)=v} w_a e^{2(u_ha−u_ta)} − Σ_{t(a)=v} w_a e^{2(u_ha−u_ta)} − τ_v`.
pub fn vortex_residual(system: &TorusSystem, state: &PotentialState) -> Result<Vec<Vec<f64>>> {
    let g = state.gauge_defect(&system.params.sigma);
    let scale = 1.0 + state.u.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
    if g.abs() > 1e-9 * scale {
        return Err(Error::GaugeViolation(g));
    }
    Ok(residual_unchecked(system, state))
}

pub fn sup_norm(r: &[Vec<f64>]) -> f64 {
    r.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `Σ_v ∫ residual_v`; equals the admissibility defect.
pub fn residual_integral(r: &[Vec<f64>]) -> f64 {
    r.iter().map(|f| TorusGrid::mean(f)).sum()
}
