use super::solver::{solve_vortex, VortexOptions, VortexSolution};
use super::system::TorusSystem;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::moment::{flow_solve, FlowOptions, FlowReport, FlowStatus};
use crate::rep::TwistedRep;

#[derive(Debug, Clone)]
pub struct FlatComparison {
    /// One-dimensional point representation with `|φ_a|² = w_a`.
    pub rep: TwistedRep,
    pub flow: FlowReport,
    /// Constant lift `u_v = s_v / 2` of the point solution.
    pub point_u: Vec<f64>,
    pub torus: VortexSolution,
    pub sup_difference: f64,
}

/// Point-scale representation equivalent to a flat constant-weight system.
pub fn flat_point_rep(system: &TorusSystem) -> Result<TwistedRep> {
    if let Some(v) = system.degrees.iter().position(|&d| d != 0) {
        return Err(Error::NotFlatCase(format!(
            "vertex {} has degree {}",
            system.quiver.vertices()[v],
            system.degrees[v]
        )));
    }
    let mut maps = Vec::new();
    for (a, w) in system.weights.iter().enumerate() {
        if w.iter().any(|x| *x != w[0]) {
            return Err(Error::NotFlatCase(format!(
                "weight of arrow {} is not constant",
                system.quiver.arrow(a).name
            )));
        }
        maps.push(CMatrix::from_element(1, 1, w[0].sqrt().into()));
    }
    TwistedRep::untwisted(system.quiver.clone(), vec![1; system.vertex_count()], maps)
}

/// Solves both the point flow and the torus system and compares them.
pub fn flat_case_reduce(
    system: &TorusSystem,
    flow_opts: &FlowOptions,
    vortex_opts: &VortexOptions,
) -> Result<FlatComparison> {
    let rep = flat_point_rep(system)?;
    let flow = flow_solve(&rep, &system.params, flow_opts)?;
    let point_u: Vec<f64> = flow.final_metric.s.iter().map(|s| 0.5 * s[(0, 0)].re).collect();
    let torus = solve_vortex(system, vortex_opts)?;
    let sup_difference = if flow.status == FlowStatus::Converged {
        torus
            .state
            .u
            .iter()
            .zip(&point_u)
            .flat_map(|(f, c)| f.iter().map(move |x| (x - c).abs()))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(FlatComparison {
        rep,
        flow,
        point_u,
        torus,
        sup_difference,
    })
}
