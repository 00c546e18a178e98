//! Numerical tolerances and geometric normalizations.
//!
//! Every constant lives in the checked-in `conventions.json` next to the
//! crate manifest. The file is embedded at compile time and parsed once;
//! result records echo the whole table so a run can be interpreted later.
//!
//! Geometry: lengths use the unit-curvature round sphere (radius 1, area
//! 4π). The measure μ is normalized separately to total mass 1, so the
//! pullback to a stereographic chart is `(1/π)(1 + |ζ|²)^{-2}`.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

const RAW: &str = include_str!("../conventions.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub version: u32,
    pub sphere_radius: f64,
    pub measure_total_mass: f64,
    pub chart_density_constant: f64,
    /// Minimum chordal distance for two points to count as distinct.
    pub eps_pt: f64,
    /// Minimum chordal distance from the antipode for a geodesic to be unique.
    pub eps_anti: f64,
    /// Minimum pairwise separation enforced when sampling configurations.
    pub eps_conf: f64,
    /// Minimum distance between planar strands in cross-ratio coordinates.
    pub eps_planar: f64,
    /// Max ratio |Δd| / |d| for every planar strand difference between samples.
    pub loop_relative_step: f64,
    /// Max chordal move of any point between consecutive loop samples.
    pub loop_max_sphere_step: f64,
    pub loop_max_refinements: u32,
    pub genericity_min_sin_angle: f64,
    pub genericity_min_dt: f64,
    pub direction_retry_budget: u32,
    pub integrator_dt: f64,
    pub integrator_step_tolerance: f64,
    pub homogenization_depth: usize,
    pub homogenization_residual_tol: f64,
    pub default_samples: usize,
    pub closed_form_abs_tol: f64,
    pub form_relative_variation: f64,
    pub sign_convention: String,
}

pub fn conventions() -> &'static Conventions {
    static CELL: OnceLock<Conventions> = OnceLock::new();
    CELL.get_or_init(|| serde_json::from_str(RAW).expect("embedded conventions.json is valid"))
}

/// The raw text of the conventions file, for echoing into outputs.
pub fn conventions_json() -> serde_json::Value {
    serde_json::to_value(conventions()).expect("conventions serialize")
}
