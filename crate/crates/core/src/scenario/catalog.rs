//! The parabolic control system on an interval and the built-in scenarios.

use super::{parse_scenario, Scenario, Workflow};
use crate::cauchy::{Evolution, StepConfig};
use crate::error::{Error, Result};
use crate::grid::{SpaceGrid, TimeGrid};
use crate::monotone::{laplacian_first_eigenvalue, DeclaredConstants, OperatorKind, OperatorSpec, PhiSpec};
use crate::set_valued::{ControlShape, Drift, GainField, MultimapSpec};

/// `u_t - Delta_p u + beta(u) in f0(u) + k(z) v`, `|v| <= control_radius`,
/// with zero boundary values on `(0, extent)`.
#[derive(Debug, Clone)]
pub struct ParabolicParams {
    pub p: f64,
    /// Interior nodes.
    pub nodes: usize,
    pub extent: f64,
    pub b: f64,
    pub n_steps: usize,
    pub beta: PhiSpec,
    pub f0: Drift,
    pub control_radius: f64,
    pub gain: GainField,
    /// Use `-Delta_p u - Delta u` instead of `-Delta_p u`.
    pub with_laplacian: bool,
    pub workflow: Workflow,
}

impl Default for ParabolicParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            nodes: 49,
            extent: 1.0,
            b: 1.0,
            n_steps: 200,
            beta: PhiSpec::zero(),
            f0: Drift::Zero,
            control_radius: 0.0,
            gain: GainField::Uniform { value: 1.0 },
            with_laplacian: false,
            workflow: Workflow::Convex,
        }
    }
}

pub fn build_parabolic_scenario(params: &ParabolicParams) -> Result<Scenario> {
    if !(params.p >= 2.0) {
        return Err(Error::param("op.p", format!("need p >= 2, got {}", params.p)));
    }
    if !(params.control_radius >= 0.0) {
        return Err(Error::param("control_radius", "must be nonnegative"));
    }
    let space = SpaceGrid::line(params.extent, params.nodes)?;
    let grid = TimeGrid::new(params.b, params.n_steps)?;
    let p = params.p;
    let kind = if params.with_laplacian {
        OperatorKind::PLaplacianPlusLaplacian { p }
    } else {
        OperatorKind::PLaplacian { p }
    };
    // Only the linear part contributes a positive constant in H.
    let lambda1 = laplacian_first_eigenvalue(&space);
    let strong = if params.with_laplacian || p == 2.0 { lambda1 } else { 0.0 };
    let declared = DeclaredConstants {
        strong_monotonicity: strong,
        coercivity: 1.0,
        growth_a1: 0.0,
        growth_c1: 1.0,
    };
    let op = OperatorSpec::new(kind, declared)?;
    let evolution = Evolution::new(space, op, params.beta.clone(), StepConfig::newton())?;
    // The inclusion is written as -u' in A u + d phi(u) + F(u), so F carries -f0.
    let drift = params.f0.negated();
    let multimap = if params.control_radius == 0.0 {
        MultimapSpec::single_valued(drift)
    } else {
        MultimapSpec::new(drift, ControlShape::Box { radius: params.control_radius }, params.gain)?
    };
    Ok(Scenario::new("parabolic", params.workflow, grid, evolution, multimap))
}

const BUILTINS: [(&str, &str); 9] = [
    ("cauchy_decay", include_str!("../../../../scenarios/cauchy_decay.toml")),
    ("cos_periodic", include_str!("../../../../scenarios/cos_periodic.toml")),
    ("convex_interval", include_str!("../../../../scenarios/convex_interval.toml")),
    ("ball_invariance", include_str!("../../../../scenarios/ball_invariance.toml")),
    ("cubic_regularized", include_str!("../../../../scenarios/cubic_regularized.toml")),
    ("extremal_interval", include_str!("../../../../scenarios/extremal_interval.toml")),
    ("relaxation_benchmark", include_str!("../../../../scenarios/relaxation_benchmark.toml")),
    ("parabolic_heat", include_str!("../../../../scenarios/parabolic_heat.toml")),
    ("parabolic_p4", include_str!("../../../../scenarios/parabolic_p4.toml")),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

/// A catalog scenario by name.
pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, src) = BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config("name", format!("no built-in scenario \"{name}\"")))?;
    parse_scenario(src)
}
