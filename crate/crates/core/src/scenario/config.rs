//! TOML scenario files. Unknown keys are rejected; every default that gets
//! filled in is recorded so the run can echo it.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::catalog::{build_parabolic_scenario, ParabolicParams};
use super::{ForcingSpec, PathStage, Scenario, Workflow};
use crate::cauchy::{Evolution, InnerMethod, StepConfig};
use crate::error::{Error, Result};
use crate::grid::{SpaceGrid, StateVector, TimeGrid};
use crate::monotone::{DeclaredConstants, Modulation, MonotoneTable, OperatorKind, OperatorSpec, PhiSpec, ScalarGraph};
use crate::relaxation::window_steps;
use crate::set_valued::{ControlShape, Drift, GainField, MultimapSpec, Selection, VertexSchedule};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    workflow: String,
    seed: Option<u64>,
    grid: Option<GridConfig>,
    space: Option<SpaceConfig>,
    op: Option<OpConfig>,
    phi: Option<PhiConfig>,
    multimap: Option<MultimapConfig>,
    forcing: Option<ForcingConfig>,
    initial: Option<InitialConfig>,
    solver: Option<SolverConfig>,
    selection: Option<SelectionConfig>,
    relaxation: Option<RelaxationConfig>,
    regularization: Option<RegularizationConfig>,
    diagnostics: Option<DiagnosticsConfig>,
    parabolic: Option<ParabolicConfig>,
    output: Option<OutputConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridConfig {
    b: f64,
    n_steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrTwo<T> {
    One(T),
    Two([T; 2]),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceConfig {
    kind: String,
    dim: Option<usize>,
    extent: Option<OneOrTwo<f64>>,
    nodes: Option<OneOrTwo<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModulationConfig {
    amplitude: f64,
    frequency: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpConfig {
    kind: String,
    a: Option<f64>,
    p: Option<f64>,
    knots: Option<Vec<[f64; 2]>>,
    strong_monotonicity: Option<f64>,
    coercivity: Option<f64>,
    growth_a1: Option<f64>,
    growth_c1: Option<f64>,
    modulation: Option<ModulationConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct PhiConfig {
    kind: String,
    slope: Option<f64>,
    weight: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    knots: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriftConfig {
    kind: String,
    value: Option<f64>,
    slope: Option<f64>,
    amplitude: Option<f64>,
    frequency: Option<f64>,
    k0: Option<f64>,
    cap: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlConfig {
    kind: String,
    radius: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    points: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainConfig {
    kind: String,
    value: Option<f64>,
    peak: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultimapConfig {
    drift: Option<DriftConfig>,
    control: Option<ControlConfig>,
    gain: Option<GainConfig>,
    hartman_radius: Option<f64>,
    lipschitz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForcingConfig {
    kind: String,
    value: Option<f64>,
    amplitude: Option<f64>,
    frequency: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialConfig {
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverConfig {
    inner_method: Option<String>,
    inner_tol: Option<f64>,
    inner_max_iter: Option<usize>,
    damping: Option<f64>,
    max_halvings: Option<u32>,
    outer_tol: Option<f64>,
    outer_max: Option<usize>,
    theta: Option<f64>,
    forcing_tol: Option<f64>,
    forcing_max: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectionConfig {
    mode: String,
    period: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelaxationConfig {
    delta: Option<f64>,
    deltas: Option<Vec<f64>>,
    eps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegularizationConfig {
    eps_schedule: Option<Vec<f64>>,
    stage: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagnosticsConfig {
    samples: Option<usize>,
    scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParabolicConfig {
    p: f64,
    nodes: usize,
    extent: Option<f64>,
    beta: Option<PhiConfig>,
    f0: Option<DriftConfig>,
    control_radius: Option<f64>,
    gain: Option<GainConfig>,
    with_laplacian: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputConfig {
    dir: PathBuf,
}

fn require<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(field, "required"))
}

/// Rejects keys that the chosen `kind` does not use.
fn unused(section: &str, kind: &str, fields: &[(&str, bool)]) -> Result<()> {
    for (name, present) in fields {
        if *present {
            return Err(Error::config(
                format!("{section}.{name}"),
                format!("not used by kind \"{kind}\""),
            ));
        }
    }
    Ok(())
}

fn unknown_kind(section: &str, kind: &str, allowed: &[&str]) -> Error {
    Error::config(
        format!("{section}.kind"),
        format!("unknown kind \"{kind}\", expected one of {}", allowed.join(", ")),
    )
}

/// Turns a constructor's parameter error into a config error on the given section.
fn in_section(section: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Parameter { name, reason } => {
            let field = if let Some(rest) = name.strip_prefix("phi.").filter(|_| section != "phi") {
                format!("{section}.{rest}")
            } else if name.contains('.') {
                name.to_string()
            } else {
                format!("{section}.{name}")
            };
            Error::config(field, reason)
        }
        other => other,
    }
}

fn table(knots: Vec<[f64; 2]>, field: &str) -> Result<MonotoneTable> {
    MonotoneTable::new(knots.into_iter().map(|[x, y]| (x, y)).collect()).map_err(|e| Error::config(field, e.to_string()))
}

fn build_space(c: SpaceConfig) -> Result<SpaceGrid> {
    let s = "space";
    match c.kind.as_str() {
        "scalar" => {
            unused(s, "scalar", &[("dim", c.dim.is_some()), ("extent", c.extent.is_some()), ("nodes", c.nodes.is_some())])?;
            Ok(SpaceGrid::scalar())
        }
        "euclidean" => {
            unused(s, "euclidean", &[("extent", c.extent.is_some()), ("nodes", c.nodes.is_some())])?;
            SpaceGrid::euclidean(require(c.dim, "space.dim")?).map_err(in_section(s))
        }
        "line" => {
            unused(s, "line", &[("dim", c.dim.is_some())])?;
            let extent = match c.extent {
                None => 1.0,
                Some(OneOrTwo::One(e)) => e,
                Some(OneOrTwo::Two(_)) => return Err(Error::config("space.extent", "a line takes a single extent")),
            };
            let nodes = match require(c.nodes, "space.nodes")? {
                OneOrTwo::One(n) => n,
                OneOrTwo::Two(_) => return Err(Error::config("space.nodes", "a line takes a single node count")),
            };
            SpaceGrid::line(extent, nodes).map_err(in_section(s))
        }
        "plane" => {
            unused(s, "plane", &[("dim", c.dim.is_some())])?;
            let extent = match c.extent {
                None => [1.0, 1.0],
                Some(OneOrTwo::One(e)) => [e, e],
                Some(OneOrTwo::Two(e)) => e,
            };
            let nodes = match require(c.nodes, "space.nodes")? {
                OneOrTwo::One(n) => [n, n],
                OneOrTwo::Two(n) => n,
            };
            SpaceGrid::plane(extent, nodes).map_err(in_section(s))
        }
        other => Err(unknown_kind(s, other, &["scalar", "euclidean", "line", "plane"])),
    }
}

fn build_op(c: OpConfig) -> Result<OperatorSpec> {
    let s = "op";
    let kind = match c.kind.as_str() {
        "scalar_linear" => {
            unused(s, "scalar_linear", &[("p", c.p.is_some()), ("knots", c.knots.is_some())])?;
            OperatorKind::ScalarLinear { a: require(c.a, "op.a")? }
        }
        k @ ("p_laplacian" | "p_laplacian_plus_laplacian" | "power") => {
            unused(s, k, &[("a", c.a.is_some()), ("knots", c.knots.is_some())])?;
            let p = require(c.p, "op.p")?;
            match k {
                "p_laplacian" => OperatorKind::PLaplacian { p },
                "power" => OperatorKind::Power { p },
                _ => OperatorKind::PLaplacianPlusLaplacian { p },
            }
        }
        "table" => {
            unused(s, "table", &[("a", c.a.is_some()), ("p", c.p.is_some())])?;
            OperatorKind::Table(table(require(c.knots, "op.knots")?, "op.knots")?)
        }
        other => {
            return Err(unknown_kind(
                s,
                other,
                &["scalar_linear", "p_laplacian", "p_laplacian_plus_laplacian", "power", "table"],
            ))
        }
    };
    let base = match &kind {
        OperatorKind::ScalarLinear { a } => OperatorSpec::scalar_linear(*a).map_err(in_section(s))?.declared,
        _ => DeclaredConstants::default(),
    };
    let declared = DeclaredConstants {
        strong_monotonicity: c.strong_monotonicity.unwrap_or(base.strong_monotonicity),
        coercivity: c.coercivity.unwrap_or(base.coercivity),
        growth_a1: c.growth_a1.unwrap_or(base.growth_a1),
        growth_c1: c.growth_c1.unwrap_or(base.growth_c1),
    };
    let mut op = OperatorSpec::new(kind, declared).map_err(in_section(s))?;
    if let Some(m) = c.modulation {
        op = op.with_modulation(Modulation::new(m.amplitude, m.frequency).map_err(in_section("op.modulation"))?);
    }
    Ok(op)
}

pub(super) fn build_phi(c: PhiConfig, s: &str) -> Result<PhiSpec> {
    let f = |n: &str| format!("{s}.{n}");
    let graph = match c.kind.as_str() {
        "zero" => {
            unused(s, "zero", &[("slope", c.slope.is_some()), ("weight", c.weight.is_some()), ("lo", c.lo.is_some()), ("hi", c.hi.is_some()), ("knots", c.knots.is_some())])?;
            ScalarGraph::Zero
        }
        "linear" => {
            unused(s, "linear", &[("weight", c.weight.is_some()), ("lo", c.lo.is_some()), ("hi", c.hi.is_some()), ("knots", c.knots.is_some())])?;
            ScalarGraph::Linear { slope: require(c.slope, &f("slope"))? }
        }
        "abs" => {
            unused(s, "abs", &[("slope", c.slope.is_some()), ("lo", c.lo.is_some()), ("hi", c.hi.is_some()), ("knots", c.knots.is_some())])?;
            ScalarGraph::Abs { weight: require(c.weight, &f("weight"))? }
        }
        "indicator" => {
            unused(s, "indicator", &[("slope", c.slope.is_some()), ("weight", c.weight.is_some()), ("knots", c.knots.is_some())])?;
            ScalarGraph::Indicator {
                lo: require(c.lo, &f("lo"))?,
                hi: require(c.hi, &f("hi"))?,
            }
        }
        "table" => {
            unused(s, "table", &[("slope", c.slope.is_some()), ("weight", c.weight.is_some()), ("lo", c.lo.is_some()), ("hi", c.hi.is_some())])?;
            ScalarGraph::Table(table(require(c.knots, &f("knots"))?, &f("knots"))?)
        }
        other => return Err(unknown_kind(s, other, &["zero", "linear", "abs", "indicator", "table"])),
    };
    PhiSpec::new(graph).map_err(in_section(s))
}

fn build_drift(c: DriftConfig, s: &str) -> Result<Drift> {
    let f = |n: &str| format!("{s}.{n}");
    let present = [
        ("value", c.value.is_some()),
        ("slope", c.slope.is_some()),
        ("amplitude", c.amplitude.is_some()),
        ("frequency", c.frequency.is_some()),
        ("k0", c.k0.is_some()),
        ("cap", c.cap.is_some()),
    ];
    let allowed: &[&str] = match c.kind.as_str() {
        "zero" => &[],
        "constant" => &["value"],
        "linear" => &["slope"],
        "sine" => &["amplitude"],
        "cosine" => &["amplitude", "frequency"],
        "saturated_growth" => &["k0", "cap"],
        other => {
            return Err(unknown_kind(
                s,
                other,
                &["zero", "constant", "linear", "sine", "cosine", "saturated_growth"],
            ))
        }
    };
    let extra: Vec<(&str, bool)> = present.iter().filter(|(n, _)| !allowed.contains(n)).copied().collect();
    unused(s, &c.kind, &extra)?;
    let drift = match c.kind.as_str() {
        "zero" => Drift::Zero,
        "constant" => Drift::Constant { value: require(c.value, &f("value"))? },
        "linear" => Drift::Linear { slope: require(c.slope, &f("slope"))? },
        "sine" => Drift::Sine { amplitude: require(c.amplitude, &f("amplitude"))? },
        "cosine" => Drift::Cosine {
            amplitude: require(c.amplitude, &f("amplitude"))?,
            frequency: require(c.frequency, &f("frequency"))?,
        },
        _ => Drift::SaturatedGrowth {
            k0: require(c.k0, &f("k0"))?,
            cap: require(c.cap, &f("cap"))?,
        },
    };
    Ok(drift)
}

fn build_gain(c: GainConfig, s: &str) -> Result<GainField> {
    match c.kind.as_str() {
        "uniform" => {
            unused(s, "uniform", &[("peak", c.peak.is_some())])?;
            Ok(GainField::Uniform { value: require(c.value, &format!("{s}.value"))? })
        }
        "bump" => {
            unused(s, "bump", &[("value", c.value.is_some())])?;
            Ok(GainField::Bump { peak: require(c.peak, &format!("{s}.peak"))? })
        }
        other => Err(unknown_kind(s, other, &["uniform", "bump"])),
    }
}

fn build_control(c: ControlConfig) -> Result<ControlShape> {
    let s = "multimap.control";
    match c.kind.as_str() {
        "box" => {
            unused(s, "box", &[("lo", c.lo.is_some()), ("hi", c.hi.is_some()), ("points", c.points.is_some())])?;
            Ok(ControlShape::Box { radius: require(c.radius, "multimap.control.radius")? })
        }
        "interval" => {
            unused(s, "interval", &[("radius", c.radius.is_some()), ("points", c.points.is_some())])?;
            Ok(ControlShape::Interval {
                lo: require(c.lo, "multimap.control.lo")?,
                hi: require(c.hi, "multimap.control.hi")?,
            })
        }
        "finite" => {
            unused(s, "finite", &[("radius", c.radius.is_some()), ("lo", c.lo.is_some()), ("hi", c.hi.is_some())])?;
            Ok(ControlShape::Finite { points: require(c.points, "multimap.control.points")? })
        }
        other => Err(unknown_kind(s, other, &["box", "interval", "finite"])),
    }
}

fn build_multimap(c: MultimapConfig, defaults: &mut Vec<String>) -> Result<MultimapSpec> {
    let drift = match c.drift {
        Some(d) => build_drift(d, "multimap.drift")?,
        None => {
            defaults.push("multimap.drift = zero".into());
            Drift::Zero
        }
    };
    let mut f = match c.control {
        None => {
            if c.gain.is_some() {
                return Err(Error::config("multimap.gain", "given without a control set"));
            }
            MultimapSpec::single_valued(drift)
        }
        Some(ctrl) => {
            let shape = build_control(ctrl)?;
            let gain = match (c.gain, &shape) {
                (Some(g), _) => build_gain(g, "multimap.gain")?,
                (None, ControlShape::Box { .. }) => {
                    return Err(Error::config("multimap.gain", "a box control needs a gain field"))
                }
                (None, _) => {
                    defaults.push("multimap.gain = uniform 1".into());
                    GainField::Uniform { value: 1.0 }
                }
            };
            MultimapSpec::new(drift, shape, gain)?
        }
    };
    if let Some(m) = c.hartman_radius {
        if !(m > 0.0) {
            return Err(Error::config("multimap.hartman_radius", "must be positive"));
        }
        f = f.with_hartman_radius(m);
    }
    if let Some(l) = c.lipschitz {
        if !(l >= 0.0) {
            return Err(Error::config("multimap.lipschitz", "must be nonnegative"));
        }
        f.declared_lipschitz = Some(l);
    }
    Ok(f)
}

fn build_forcing(c: ForcingConfig) -> Result<ForcingSpec> {
    let s = "forcing";
    let fields = [
        ("value", c.value.is_some()),
        ("amplitude", c.amplitude.is_some()),
        ("frequency", c.frequency.is_some()),
    ];
    match c.kind.as_str() {
        "zero" => {
            unused(s, "zero", &fields)?;
            Ok(ForcingSpec::Zero)
        }
        "constant" => {
            unused(s, "constant", &fields[1..])?;
            Ok(ForcingSpec::Constant { value: require(c.value, "forcing.value")? })
        }
        k @ ("cosine" | "sine") => {
            unused(s, k, &fields[..1])?;
            let amplitude = require(c.amplitude, "forcing.amplitude")?;
            let frequency = require(c.frequency, "forcing.frequency")?;
            Ok(if k == "cosine" {
                ForcingSpec::Cosine { amplitude, frequency }
            } else {
                ForcingSpec::Sine { amplitude, frequency }
            })
        }
        other => Err(unknown_kind(s, other, &["zero", "constant", "cosine", "sine"])),
    }
}

fn build_selection(c: SelectionConfig) -> Result<Selection> {
    let s = "selection";
    if c.mode != "extremal_alternate" {
        unused(s, &c.mode, &[("period", c.period.is_some())])?;
    }
    Ok(match c.mode.as_str() {
        "minimal_norm" => Selection::MinimalNorm,
        "centroid" => Selection::Centroid,
        "extremal_upper" => Selection::ExtremalVertex(VertexSchedule::Upper),
        "extremal_lower" => Selection::ExtremalVertex(VertexSchedule::Lower),
        "extremal_alternate" => {
            let period = require(c.period, "selection.period")?;
            if !(period > 0.0) {
                return Err(Error::config("selection.period", "must be positive"));
            }
            Selection::ExtremalVertex(VertexSchedule::Alternate { period })
        }
        other => {
            return Err(Error::config(
                "selection.mode",
                format!(
                    "unknown mode \"{other}\", expected one of minimal_norm, centroid, extremal_upper, extremal_lower, extremal_alternate"
                ),
            ))
        }
    })
}

fn or_default<T: std::fmt::Debug>(v: Option<T>, default: T, key: &str, defaults: &mut Vec<String>) -> T {
    v.unwrap_or_else(|| {
        defaults.push(format!("{key} = {default:?}"));
        default
    })
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parses and validates a scenario from TOML text.
pub fn parse_scenario(src: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(src).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(src, s.start)),
        message: e.message().to_string(),
    })?;
    let mut defaults = Vec::new();
    let workflow = Workflow::parse(&file.workflow).ok_or_else(|| {
        let names: Vec<&str> = Workflow::ALL.iter().map(|w| w.name()).collect();
        Error::config("workflow", format!("unknown workflow \"{}\", expected one of {}", file.workflow, names.join(", ")))
    })?;
    let seed = require(file.seed, "seed")?;
    let g = require(file.grid, "grid")?;
    let grid = TimeGrid::new(g.b, g.n_steps).map_err(in_section("grid"))?;

    let solver = file.solver.unwrap_or(SolverConfig {
        inner_method: None,
        inner_tol: None,
        inner_max_iter: None,
        damping: None,
        max_halvings: None,
        outer_tol: None,
        outer_max: None,
        theta: None,
        forcing_tol: None,
        forcing_max: None,
    });

    let (space, op, phi, multimap, parabolic_method) = match file.parabolic {
        Some(pc) => {
            for (name, present) in [
                ("space", file.space.is_some()),
                ("op", file.op.is_some()),
                ("phi", file.phi.is_some()),
                ("multimap", file.multimap.is_some()),
            ] {
                if present {
                    return Err(Error::config(name, "not allowed together with [parabolic]"));
                }
            }
            let params = ParabolicParams {
                p: pc.p,
                nodes: pc.nodes,
                extent: or_default(pc.extent, 1.0, "parabolic.extent", &mut defaults),
                b: grid.b(),
                n_steps: grid.n_steps(),
                beta: match pc.beta {
                    Some(c) => build_phi(c, "parabolic.beta")?,
                    None => {
                        defaults.push("parabolic.beta = zero".into());
                        PhiSpec::zero()
                    }
                },
                f0: match pc.f0 {
                    Some(c) => build_drift(c, "parabolic.f0")?,
                    None => {
                        defaults.push("parabolic.f0 = zero".into());
                        Drift::Zero
                    }
                },
                control_radius: or_default(pc.control_radius, 0.0, "parabolic.control_radius", &mut defaults),
                gain: match pc.gain {
                    Some(c) => build_gain(c, "parabolic.gain")?,
                    None => {
                        defaults.push("parabolic.gain = uniform 1".into());
                        GainField::Uniform { value: 1.0 }
                    }
                },
                with_laplacian: or_default(pc.with_laplacian, false, "parabolic.with_laplacian", &mut defaults),
                workflow,
            };
            let scn = build_parabolic_scenario(&params).map_err(in_section("parabolic"))?;
            let method = scn.evolution.step.inner_method;
            (scn.evolution.space, scn.evolution.op, scn.evolution.phi, scn.multimap, Some(method))
        }
        None => {
            let space = match file.space {
                Some(c) => build_space(c)?,
                None => {
                    defaults.push("space = scalar".into());
                    SpaceGrid::scalar()
                }
            };
            let op = build_op(require(file.op, "op")?)?;
            let phi = match file.phi {
                Some(c) => build_phi(c, "phi")?,
                None => {
                    defaults.push("phi = zero".into());
                    PhiSpec::zero()
                }
            };
            let multimap = match file.multimap {
                Some(c) => build_multimap(c, &mut defaults)?,
                None => {
                    defaults.push("multimap = single-valued zero".into());
                    MultimapSpec::single_valued(Drift::Zero)
                }
            };
            (space, op, phi, multimap, None)
        }
    };
    if matches!(op.kind, OperatorKind::PLaplacian { .. } | OperatorKind::PLaplacianPlusLaplacian { .. }) && !space.is_spatial() {
        return Err(Error::config("op.kind", "the p-Laplacian needs a line or plane space"));
    }

    let base = StepConfig::default();
    let inner_method = match solver.inner_method.as_deref() {
        None => {
            let m = parabolic_method.unwrap_or(base.inner_method);
            defaults.push(format!("solver.inner_method = {m:?}"));
            m
        }
        Some("fixed_point_prox") => InnerMethod::FixedPointProx,
        Some("damped_newton") => InnerMethod::DampedNewton,
        Some(other) => {
            return Err(Error::config(
                "solver.inner_method",
                format!("unknown method \"{other}\", expected fixed_point_prox or damped_newton"),
            ))
        }
    };
    let default_iters = match inner_method {
        InnerMethod::FixedPointProx => base.inner_max_iter,
        InnerMethod::DampedNewton => StepConfig::newton().inner_max_iter,
    };
    let step = StepConfig {
        inner_method,
        inner_tol: or_default(solver.inner_tol, base.inner_tol, "solver.inner_tol", &mut defaults),
        inner_max_iter: or_default(solver.inner_max_iter, default_iters, "solver.inner_max_iter", &mut defaults),
        damping: or_default(solver.damping, base.damping, "solver.damping", &mut defaults),
        max_halvings: or_default(solver.max_halvings, base.max_halvings, "solver.max_halvings", &mut defaults),
    };
    let evolution = Evolution::new(space, op, phi, step).map_err(in_section("solver"))?;

    let mut scn = Scenario::new(file.name, workflow, grid, evolution, multimap);
    scn.seed = seed;
    scn.periodic.outer_tol = or_default(solver.outer_tol, scn.periodic.outer_tol, "solver.outer_tol", &mut defaults);
    scn.periodic.outer_max = or_default(solver.outer_max, scn.periodic.outer_max, "solver.outer_max", &mut defaults);
    scn.theta = or_default(solver.theta, scn.theta, "solver.theta", &mut defaults);
    scn.forcing_tol = or_default(solver.forcing_tol, scn.forcing_tol, "solver.forcing_tol", &mut defaults);
    scn.forcing_max = or_default(solver.forcing_max, scn.forcing_max, "solver.forcing_max", &mut defaults);
    if !(scn.periodic.outer_tol > 0.0) || scn.periodic.outer_max == 0 {
        return Err(Error::config("solver.outer_tol", "need outer_tol > 0 and outer_max >= 1"));
    }
    if !(scn.theta > 0.0 && scn.theta <= 1.0) {
        return Err(Error::config("solver.theta", "must lie in (0, 1]"));
    }
    if !(scn.forcing_tol > 0.0) || scn.forcing_max == 0 {
        return Err(Error::config("solver.forcing_tol", "need forcing_tol > 0 and forcing_max >= 1"));
    }

    scn.forcing = match file.forcing {
        Some(c) => build_forcing(c)?,
        None => {
            if matches!(workflow, Workflow::Cauchy | Workflow::PeriodicFixedH) {
                defaults.push("forcing = zero".into());
            }
            ForcingSpec::Zero
        }
    };
    if let Some(c) = file.initial {
        if !c.value.is_finite() {
            return Err(Error::config("initial.value", "must be finite"));
        }
        scn.x0 = StateVector::constant(space.len(), c.value);
    }
    scn.selection = match file.selection {
        Some(c) => build_selection(c)?,
        None => {
            if matches!(workflow, Workflow::Convex | Workflow::Nonconvex | Workflow::Relaxation | Workflow::RegularizedPath) {
                defaults.push("selection.mode = minimal_norm".into());
            }
            Selection::MinimalNorm
        }
    };

    let relax = file.relaxation.unwrap_or(RelaxationConfig {
        delta: None,
        deltas: None,
        eps: None,
    });
    scn.delta = relax.delta;
    scn.deltas = relax.deltas.unwrap_or_default();
    scn.relax_eps = relax.eps;
    if let Some(d) = scn.delta {
        window_steps(&grid, d).map_err(|e| Error::config("relaxation.delta", e.to_string()))?;
    }
    for &d in &scn.deltas {
        window_steps(&grid, d).map_err(|e| Error::config("relaxation.deltas", e.to_string()))?;
    }
    if scn.deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("relaxation.deltas", "must be strictly decreasing"));
    }
    if let Some(e) = scn.relax_eps {
        if !(e > 0.0) {
            return Err(Error::config("relaxation.eps", "must be positive"));
        }
    }

    let reg = file.regularization.unwrap_or(RegularizationConfig {
        eps_schedule: None,
        stage: None,
    });
    if let Some(sched) = reg.eps_schedule {
        scn.eps_schedule = sched;
    } else if workflow == Workflow::RegularizedPath {
        defaults.push(format!("regularization.eps_schedule = {:?}", scn.eps_schedule));
    }
    if scn.eps_schedule.is_empty()
        || scn.eps_schedule.windows(2).any(|w| w[1] >= w[0])
        || scn.eps_schedule[scn.eps_schedule.len() - 1] < 1e-6
    {
        return Err(Error::config(
            "regularization.eps_schedule",
            "need a nonempty, strictly decreasing schedule ending at or above 1e-6",
        ));
    }
    scn.path_stage = match reg.stage.as_deref() {
        None | Some("convex") => PathStage::Convex,
        Some("extremal") => PathStage::Extremal,
        Some(other) => {
            return Err(Error::config(
                "regularization.stage",
                format!("unknown stage \"{other}\", expected convex or extremal"),
            ))
        }
    };

    let diag = file.diagnostics.unwrap_or(DiagnosticsConfig { samples: None, scale: None });
    scn.samples = or_default(diag.samples, scn.samples, "diagnostics.samples", &mut defaults);
    scn.sample_scale = or_default(diag.scale, scn.sample_scale, "diagnostics.scale", &mut defaults);
    if scn.samples == 0 || !(scn.sample_scale > 0.0) {
        return Err(Error::config("diagnostics", "need samples >= 1 and scale > 0"));
    }
    scn.output_dir = file.output.map(|o| o.dir);

    match workflow {
        Workflow::Extremal if scn.delta.is_none() => {
            return Err(Error::config("relaxation.delta", "required by the extremal workflow"));
        }
        Workflow::Relaxation if scn.deltas.is_empty() => {
            return Err(Error::config("relaxation.deltas", "required by the relaxation workflow"));
        }
        Workflow::RegularizedPath if scn.path_stage == PathStage::Extremal && scn.delta.is_none() => {
            return Err(Error::config("relaxation.delta", "required by an extremal regularization stage"));
        }
        Workflow::PeriodicFixedH | Workflow::Convex | Workflow::Nonconvex | Workflow::Extremal | Workflow::Relaxation
            if !(scn.evolution.op.declared.strong_monotonicity > 0.0) =>
        {
            return Err(Error::config(
                "op.strong_monotonicity",
                "periodic workflows need a positive declared constant; use regularized_path otherwise",
            ));
        }
        _ => {}
    }
    scn.defaults = defaults;
    Ok(scn)
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let src = std::fs::read_to_string(path.as_ref())?;
    parse_scenario(&src)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"
workflow = "convex"
seed = 1

[grid]
b = 1.0
n_steps = 1000

[op]
kind = "scalar_linear"
a = 1.0

[phi]
kind = "zero"

[multimap.control]
kind = "interval"
lo = -1.0
hi = 1.0
"#;

    #[test]
    fn minimal_config_is_valid() {
        let scn = parse_scenario(MINIMAL).unwrap();
        assert_eq!(scn.workflow, Workflow::Convex);
        assert_eq!(scn.grid.n_steps(), 1000);
        assert_eq!(scn.multimap.control, ControlShape::Interval { lo: -1.0, hi: 1.0 });
        assert!(scn.defaults.iter().any(|d| d.starts_with("solver.inner_tol")));
    }

    fn field_of(src: &str) -> String {
        match parse_scenario(src).unwrap_err() {
            Error::Config { field, .. } => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn small_p_names_the_field() {
        let src = MINIMAL.replace("kind = \"scalar_linear\"\na = 1.0", "kind = \"power\"\np = 1.5");
        assert_eq!(field_of(&src), "op.p");
    }

    #[test]
    fn box_without_gain_is_rejected() {
        let src = MINIMAL.replace("kind = \"interval\"\nlo = -1.0\nhi = 1.0", "kind = \"box\"\nradius = 1.0");
        assert_eq!(field_of(&src), "multimap.gain");
    }

    #[test]
    fn unknown_keys_report_a_line() {
        let src = MINIMAL.replace("n_steps = 1000", "n_steps = 1000\nbogus = 3");
        match parse_scenario(&src).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 9, "{message}");
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kind_specific_fields_are_checked() {
        let src = MINIMAL.replace("a = 1.0", "a = 1.0\np = 3.0");
        assert_eq!(field_of(&src), "op.p");
        let src = MINIMAL.replace("seed = 1\n", "");
        assert_eq!(field_of(&src), "seed");
        let src = MINIMAL.replace("workflow = \"convex\"", "workflow = \"relaxation\"");
        assert_eq!(field_of(&src), "relaxation.deltas");
        let src = MINIMAL.replace("a = 1.0", "a = 0.0");
        assert_eq!(field_of(&src), "op.strong_monotonicity");
    }

    #[test]
    fn misaligned_window_rejected() {
        let src = format!("{MINIMAL}\n[relaxation]\ndeltas = [0.1, 0.0503]\n").replace("\"convex\"", "\"relaxation\"");
        assert_eq!(field_of(&src), "relaxation.deltas");
    }
}
