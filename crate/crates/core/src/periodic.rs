//! Periodic problems: the Poincare map `K(x0) = u(b)`, its Picard iteration,
//! and the forcing fixed-point loops for multivalued right-hand sides.

use serde::Serialize;

use crate::cauchy::Evolution;
use crate::error::{Error, Result};
use crate::grid::{sup_distance, ForcingPath, StateVector, TimeGrid, Trajectory};
use crate::monotone::{regularize, PhiSpec};
use crate::relaxation::{chatter_pattern, vertex_path, window_steps, VertexPattern};
use crate::set_valued::{
    path_extremal_deviation, path_membership_defect, select_path, truncate_multimap, MultimapSpec, Selection,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicOptions {
    /// Stop when `|K(x) - x| <= outer_tol`.
    pub outer_tol: f64,
    pub outer_max: usize,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-8,
            outer_max: 500,
        }
    }
}

/// Settings of the forcing loop `h <- (1 - theta) h + theta select(F, xi(h))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingOptions {
    pub periodic: PeriodicOptions,
    pub theta: f64,
    /// Stop when `||h_{j+1} - h_j||_{L^{p'}} <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub x_init: Option<StateVector>,
    pub h_init: Option<ForcingPath>,
}

impl Default for ForcingOptions {
    fn default() -> Self {
        Self {
            periodic: PeriodicOptions::default(),
            theta: 0.5,
            tol: 1e-8,
            max_iter: 100,
            x_init: None,
            h_init: None,
        }
    }
}

impl ForcingOptions {
    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::param("theta", "relaxation damping must lie in (0, 1]"));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::param("tol", "forcing loop needs tol > 0 and max_iter >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PeriodicReport {
    /// `|u(b) - u(0)|`
    pub periodicity_residual: f64,
    /// `|K(x_{j+1}) - K(x_j)| / |x_{j+1} - x_j|` along the Picard iteration.
    pub contraction_estimates: Vec<f64>,
    /// `exp(-c b)`, the rate implied by the energy estimate.
    pub expected_rate: f64,
    /// `exp(-2 c b)`, the factor as printed in the original contraction statement.
    pub stated_rate: f64,
    pub apriori_margin: Option<f64>,
    pub ball_margin: Option<f64>,
    pub outer_iterations: usize,
    pub forcing_iterations: usize,
    pub forcing_fixpoint_gap: f64,
    pub forcing_gap_history: Vec<f64>,
    /// Largest per-step inclusion defect of the returned trajectory.
    pub inclusion_defect: f64,
    pub membership_defect: Option<f64>,
    pub extremal_deviation: Option<f64>,
    /// Sup distances between consecutive solutions of a regularization path.
    pub stage_distances: Vec<f64>,
}

/// A periodic trajectory together with the forcing that produced it.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    pub trajectory: Trajectory,
    pub forcing: ForcingPath,
    pub report: PeriodicReport,
}

/// `K(x0) = u(b)`.
pub fn poincare(evo: &Evolution, grid: &TimeGrid, x0: &StateVector, h: &ForcingPath) -> Result<StateVector> {
    Ok(evo.solve_cauchy(grid, x0, h)?.last().clone())
}

fn declared_c(evo: &Evolution) -> Result<f64> {
    let c = evo.op.declared.strong_monotonicity;
    if !(c > 0.0) {
        return Err(Error::Hypothesis(format!(
            "periodic solve needs a strongly monotone operator, declared constant is {c}; regularize first"
        )));
    }
    Ok(c)
}

/// Picard iteration `x <- K(x)` from `x_init`. Returns the trajectory started
/// at the last iterate, so `|u(b) - u(0)| <= outer_tol`.
pub fn find_periodic(
    evo: &Evolution,
    grid: &TimeGrid,
    h: &ForcingPath,
    x_init: &StateVector,
    opts: &PeriodicOptions,
) -> Result<(Trajectory, PeriodicReport)> {
    let c = declared_c(evo)?;
    if !(opts.outer_tol > 0.0) || opts.outer_max == 0 {
        return Err(Error::param("outer_tol", "need outer_tol > 0 and outer_max >= 1"));
    }
    // Below this step size the measured ratio is dominated by inner-solver noise.
    let floor = (1e4 * evo.step.inner_tol).max(1e2 * opts.outer_tol);
    let space = evo.space;
    let mut x = x_init.clone();
    let mut residuals = Vec::new();
    let mut ratios = Vec::new();
    for j in 1..=opts.outer_max {
        let traj = evo.solve_cauchy(grid, &x, h)?;
        let r = space.distance(traj.last().as_slice(), x.as_slice());
        if let Some(&prev) = residuals.last() {
            if prev > floor {
                ratios.push(r / prev);
            }
        }
        log::trace!("poincare iteration {j}: residual {r:.3e}");
        residuals.push(r);
        if r <= opts.outer_tol {
            let b = grid.b();
            let report = PeriodicReport {
                periodicity_residual: traj.periodicity_residual(),
                contraction_estimates: ratios,
                expected_rate: (-c * b).exp(),
                stated_rate: (-2.0 * c * b).exp(),
                apriori_margin: Some(apriori_check(&traj, h, &evo.phi, c)),
                outer_iterations: j,
                inclusion_defect: evo.inclusion_defect(&traj, h)?,
                ..PeriodicReport::default()
            };
            return Ok((traj, report));
        }
        x = traj.last().clone();
    }
    Err(Error::OuterNonconvergence {
        iterations: opts.outer_max,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
        history: residuals,
    })
}

/// Slack in `|u(t)| <= c_hat + int_0^t |h|` with
/// `c_hat = e^{c4 b} / (e^{c4 b} - 1) (|d phi(0)| b + ||h||_1) + |d phi(0)| b`.
/// Nonnegative means the bound holds along the whole trajectory.
pub fn apriori_check(traj: &Trajectory, h: &ForcingPath, phi: &PhiSpec, c4: f64) -> f64 {
    let grid = traj.grid();
    let space = traj.space();
    let b = grid.b();
    let g0 = phi.subdifferential_at_zero_norm(space);
    let numer = g0 * b + h.l1_norm();
    let c_hat = if numer == 0.0 {
        0.0
    } else if c4 > 0.0 {
        let e = (c4 * b).exp();
        e / (e - 1.0) * numer
    } else {
        f64::INFINITY
    } + g0 * b;
    let tau = grid.tau();
    let mut integral = 0.0;
    let mut margin = f64::INFINITY;
    for k in 0..=grid.n_steps() {
        margin = margin.min(c_hat + integral - space.norm_of(traj.state(k).as_slice()));
        if k < grid.n_steps() {
            integral += tau * space.norm_of(h.value(k).as_slice());
        }
    }
    margin
}

/// `M - max_t |u(t)|`
pub fn ball_invariance_check(traj: &Trajectory, m: f64) -> f64 {
    m - traj.sup_norm()
}

/// Radius for truncating a linearly growing multimap: the a priori constant
/// with `||h||_1` replaced by `||k||_1`, closed by Gronwall and enlarged by 10%.
pub fn gronwall_radius(evo: &Evolution, grid: &TimeGrid, f: &MultimapSpec) -> Result<f64> {
    let c4 = declared_c(evo)?;
    let b = grid.b();
    let k1 = f.growth_constant(&evo.space) * b;
    let g0 = evo.phi.subdifferential_at_zero_norm(&evo.space);
    let e = (c4 * b).exp();
    let c_hat = e / (e - 1.0) * (g0 * b + k1) + g0 * b;
    Ok(1.1 * (c_hat + k1) * k1.exp())
}

/// The multimap actually used by the existence loops: truncated at the
/// Hartman radius when one is declared, at the Gronwall radius when `F`
/// depends on the state, unchanged otherwise.
pub fn existence_multimap(evo: &Evolution, grid: &TimeGrid, f: &MultimapSpec) -> Result<MultimapSpec> {
    if f.truncation.is_some() {
        return Ok(f.clone());
    }
    if let Some(m) = f.hartman_radius {
        return truncate_multimap(f, m);
    }
    if f.is_state_independent() {
        return Ok(f.clone());
    }
    truncate_multimap(f, gronwall_radius(evo, grid, f)?)
}

fn dual_exponent(evo: &Evolution) -> f64 {
    let p = evo.op.exponent();
    p / (p - 1.0)
}

fn tagged(j: usize) -> impl Fn(Error) -> Error {
    move |e| Error::stage(format!("forcing iteration {j}"), e)
}

/// Damped fixed-point loop for `h in S_{F(., xi(h))}`, where `xi(h)` is the
/// periodic solution driven by `h`. Returns `(xi(s), s)` for the last selection `s`.
pub fn solve_convex(
    evo: &Evolution,
    grid: &TimeGrid,
    f: &MultimapSpec,
    sel: &Selection,
    opts: &ForcingOptions,
) -> Result<PeriodicSolution> {
    opts.validate()?;
    let space = evo.space;
    let q = dual_exponent(evo);
    let mut x = opts.x_init.clone().unwrap_or_else(|| StateVector::zeros(space.len()));
    let mut h = match &opts.h_init {
        Some(h) => h.clone(),
        None => select_path(f, sel, &Trajectory::constant(*grid, space, &x)?)?,
    };
    let mut history = Vec::new();
    for j in 1..=opts.max_iter {
        let (u, rep) = find_periodic(evo, grid, &h, &x, &opts.periodic).map_err(tagged(j))?;
        let s = select_path(f, sel, &u)?;
        let next = h.blend(&s, opts.theta)?;
        let gap = next.difference(&h)?.lq_norm(q);
        log::debug!("forcing iteration {j}: gap {gap:.3e}");
        history.push(gap);
        x = u.initial().clone();
        if gap <= opts.tol && rep.periodicity_residual <= opts.tol {
            let (traj, mut report) = find_periodic(evo, grid, &s, &x, &opts.periodic).map_err(tagged(j + 1))?;
            report.forcing_iterations = j;
            report.forcing_fixpoint_gap = gap;
            report.forcing_gap_history = history;
            report.membership_defect = Some(path_membership_defect(f, &s, &traj)?);
            report.ball_margin = f.hartman_radius.map(|m| ball_invariance_check(&traj, m));
            return Ok(PeriodicSolution {
                trajectory: traj,
                forcing: s,
                report,
            });
        }
        h = next;
    }
    Err(Error::OuterNonconvergence {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Largest entrywise difference between two forcings on the same grids.
fn max_entry_gap(a: &ForcingPath, b: &ForcingPath) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .flat_map(|(x, y)| x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Forcing loop with extremal selections: the forcing chatters between the
/// vertices of `F(t, u(t))` around a damped minimal-norm target. Once the loop
/// settles, or stops improving, the vertex pattern is frozen and the vertex
/// values are iterated until they sit on the final trajectory's vertices to round-off.
pub fn solve_extremal(
    evo: &Evolution,
    grid: &TimeGrid,
    f: &MultimapSpec,
    delta: f64,
    opts: &ForcingOptions,
) -> Result<PeriodicSolution> {
    opts.validate()?;
    window_steps(grid, delta)?;
    let space = evo.space;
    let q = dual_exponent(evo);
    let mut x = opts.x_init.clone().unwrap_or_else(|| StateVector::zeros(space.len()));
    let u0 = Trajectory::constant(*grid, space, &x)?;
    let mut target = select_path(f, &Selection::MinimalNorm, &u0)?;
    let mut h = match &opts.h_init {
        Some(h) => h.clone(),
        None => vertex_path(f, &u0, &chatter_pattern(f, &u0, &target, delta)?)?,
    };
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for j in 1..=opts.max_iter {
        let (u, rep) = find_periodic(evo, grid, &h, &x, &opts.periodic).map_err(tagged(j))?;
        let ms = select_path(f, &Selection::MinimalNorm, &u)?;
        target = target.blend(&ms, opts.theta)?;
        let pattern = chatter_pattern(f, &u, &target, delta)?;
        let next = vertex_path(f, &u, &pattern)?;
        let gap = next.difference(&h)?.lq_norm(q);
        log::debug!("forcing iteration {j}: gap {gap:.3e}");
        history.push(gap);
        x = u.initial().clone();
        if gap < 0.5 * best {
            best = gap;
            stalled = 0;
        } else {
            stalled += 1;
        }
        // Vertex patterns are discrete and may cycle; a stalled loop freezes the current one.
        let settled = gap <= opts.tol && rep.periodicity_residual <= opts.tol;
        if settled || stalled >= 3 {
            return polish_extremal(evo, grid, f, &pattern, next, &x, opts, j, history);
        }
        h = next;
    }
    Err(Error::OuterNonconvergence {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Iterates `h <- V_P(xi(h))` for the frozen vertex pattern `P` until the
/// forcing sits on the vertices of its own trajectory.
#[allow(clippy::too_many_arguments)]
fn polish_extremal(
    evo: &Evolution,
    grid: &TimeGrid,
    f: &MultimapSpec,
    pattern: &VertexPattern,
    mut h: ForcingPath,
    x: &StateVector,
    opts: &ForcingOptions,
    iterations: usize,
    history: Vec<f64>,
) -> Result<PeriodicSolution> {
    let mut moves = Vec::new();
    for pass in 0..200 {
        let (traj, mut report) =
            find_periodic(evo, grid, &h, x, &opts.periodic).map_err(tagged(iterations + pass + 1))?;
        let refreshed = vertex_path(f, &traj, pattern)?;
        let moved = max_entry_gap(&refreshed, &h);
        moves.push(moved);
        if moved <= 1e-13 {
            report.forcing_iterations = iterations + pass;
            report.forcing_fixpoint_gap = moved;
            report.forcing_gap_history = history.into_iter().chain(moves).collect();
            report.membership_defect = Some(path_membership_defect(f, &h, &traj)?);
            report.extremal_deviation = Some(path_extremal_deviation(f, &h, &traj)?);
            report.ball_margin = f.hartman_radius.map(|m| ball_invariance_check(&traj, m));
            return Ok(PeriodicSolution {
                trajectory: traj,
                forcing: h,
                report,
            });
        }
        h = refreshed;
    }
    Err(Error::OuterNonconvergence {
        iterations: iterations + 200,
        residual: moves.last().copied().unwrap_or(f64::NAN),
        history: history.into_iter().chain(moves).collect(),
    })
}

/// Which forcing loop a regularization path runs at each stage.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingLoop {
    Convex(Selection),
    Extremal { delta: f64 },
}

/// Solves with `A + eps I` for each `eps` in the decreasing schedule, warm
/// starting every stage from the previous one.
pub fn solve_regularized_path(
    evo: &Evolution,
    grid: &TimeGrid,
    f: &MultimapSpec,
    eps_schedule: &[f64],
    stage: &ForcingLoop,
    opts: &ForcingOptions,
) -> Result<PeriodicSolution> {
    if eps_schedule.is_empty() {
        return Err(Error::param("eps_schedule", "schedule is empty"));
    }
    if eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("eps_schedule", "schedule must be strictly decreasing"));
    }
    if eps_schedule[eps_schedule.len() - 1] < 1e-6 {
        return Err(Error::param("eps_schedule", "last entry must be at least 1e-6"));
    }
    let mut prev: Option<PeriodicSolution> = None;
    let mut distances = Vec::new();
    for &eps in eps_schedule {
        let reg = Evolution {
            op: regularize(&evo.op, eps)?,
            ..evo.clone()
        };
        let mut o = opts.clone();
        if let Some(p) = &prev {
            o.x_init = Some(p.trajectory.initial().clone());
            o.h_init = Some(p.forcing.clone());
        }
        let sol = match stage {
            ForcingLoop::Convex(sel) => solve_convex(&reg, grid, f, sel, &o),
            ForcingLoop::Extremal { delta } => solve_extremal(&reg, grid, f, *delta, &o),
        }
        .map_err(|e| Error::stage(format!("eps={eps}"), e))?;
        if let Some(p) = &prev {
            distances.push(sup_distance(&p.trajectory, &sol.trajectory)?);
        }
        prev = Some(sol);
    }
    let mut sol = prev.expect("schedule is nonempty");
    sol.report.stage_distances = distances;
    Ok(sol)
}
