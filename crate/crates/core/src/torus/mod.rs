//! Line-bundle quiver vortex equations on the flat unit torus.

mod flat;
mod grid;
mod solver;
mod system;
mod ymh;

pub use flat::{flat_case_reduce, flat_point_rep, FlatComparison};
pub use grid::TorusGrid;
pub use solver::{solve_vortex, NewtonRecord, VortexOptions, VortexSolution};
pub use system::{
    admissibility_defect, residual_integral, sup_norm, vortex_residual, PotentialState, TorusSystem, WeightField,
};
pub use ymh::{ymh_identity, YmhReport};
