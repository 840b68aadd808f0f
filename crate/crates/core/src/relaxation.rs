//! Chattering between the extreme points of `F(t, u)` and the strong
//! relaxation experiment: extremal trajectories approaching a convex one.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cauchy::Evolution;
use crate::error::{Error, Result};
use crate::grid::{sup_distance, weak_norm, ForcingPath, StateVector, TimeGrid, Trajectory};
use crate::set_valued::{sampled_bound, select_path, MultimapSpec, Selection};

/// Vertex choice per step and node: `true` for the upper endpoint.
pub type VertexPattern = Vec<Vec<bool>>;

/// Number of grid steps per window, if `delta` is a positive multiple of `tau`.
pub fn window_steps(grid: &TimeGrid, delta: f64) -> Result<usize> {
    let m = (delta / grid.tau()).round();
    if !(delta > 0.0) || m < 1.0 || (m * grid.tau() - delta).abs() > 1e-9 * delta {
        return Err(Error::param(
            "delta",
            format!("{delta} is not a positive multiple of the step {}", grid.tau()),
        ));
    }
    Ok(m as usize)
}

fn is_vertex(g: f64, v: f64) -> bool {
    (g - v).abs() <= 1e-12 * (1.0 + v.abs())
}

/// Vertex choices for [`chatter`]. On each window the upper vertex is used
/// first, for as many steps as needed to match the window integral of the
/// (projected) target; the rounding remainder is carried into the next window.
/// Windows on which the target already sits on vertices keep its choices.
pub fn chatter_pattern(
    f: &MultimapSpec,
    u: &Trajectory,
    target: &ForcingPath,
    delta: f64,
) -> Result<VertexPattern> {
    let grid = *u.grid();
    let space = *u.space();
    if target.grid() != &grid || target.space() != &space {
        return Err(Error::Domain("target does not match the trajectory grids".into()));
    }
    let m = window_steps(&grid, delta)?;
    let n = grid.n_steps();
    let offsets = f.vertex_offsets(&space);
    let drift: Vec<StateVector> = (0..n)
        .map(|k| f.drift_values(grid.time(k + 1), u.state(k + 1), &space))
        .collect::<Result<_>>()?;
    let mut pattern = vec![vec![false; space.len()]; n];
    for (i, &(lo, hi)) in offsets.iter().enumerate() {
        let width = hi - lo;
        let mut carry = 0.0;
        for start in (0..n).step_by(m) {
            let end = (start + m).min(n);
            let mut need = carry;
            let mut on_vertices = true;
            for k in start..end {
                let d = drift[k].as_slice()[i];
                let g = target.value(k).as_slice()[i].clamp(d + lo, d + hi);
                need += g - d - lo;
                let up = is_vertex(g, d + hi);
                on_vertices &= up || is_vertex(g, d + lo);
                pattern[k][i] = up;
            }
            if on_vertices {
                continue;
            }
            for row in &mut pattern[start..end] {
                let up = width > 0.0 && need >= 0.5 * width;
                if up {
                    need -= width;
                }
                row[i] = up;
            }
            carry = need;
        }
    }
    Ok(pattern)
}

/// The forcing `f(t_{k+1}, u_{k+1}) + (chosen vertex offset)`.
pub fn vertex_path(f: &MultimapSpec, u: &Trajectory, pattern: &VertexPattern) -> Result<ForcingPath> {
    let grid = *u.grid();
    let space = *u.space();
    if pattern.len() != grid.n_steps() {
        return Err(Error::Dimension {
            expected: grid.n_steps(),
            found: pattern.len(),
        });
    }
    let offsets = f.vertex_offsets(&space);
    let values = (0..grid.n_steps())
        .map(|k| {
            let d = f.drift_values(grid.time(k + 1), u.state(k + 1), &space)?;
            StateVector::new(
                d.as_slice()
                    .iter()
                    .zip(&offsets)
                    .zip(&pattern[k])
                    .map(|((di, &(lo, hi)), &up)| di + if up { hi } else { lo })
                    .collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ForcingPath::new(grid, space, values)
}

/// Extremal forcing on windows of length `delta` whose running integral tracks `target`.
pub fn chatter(f: &MultimapSpec, u: &Trajectory, target: &ForcingPath, delta: f64) -> Result<ForcingPath> {
    let pattern = chatter_pattern(f, u, target, delta)?;
    vertex_path(f, u, &pattern)
}

#[derive(Debug, Clone)]
pub struct ExtremalRun {
    pub delta: f64,
    pub trajectory: Trajectory,
    /// The chattered forcing `beta_n`.
    pub forcing: ForcingPath,
    /// The near-target selection `gamma_n` along `trajectory`.
    pub target: ForcingPath,
    pub weak_gap: f64,
    pub sup_gap: f64,
    pub eps: f64,
    /// Sup distance between the trajectories before and after the refresh pass.
    pub refresh_residual: f64,
}

#[derive(Debug, Clone)]
pub struct RelaxationRun {
    pub convex_solution: Trajectory,
    pub convex_forcing: ForcingPath,
    pub extremal_runs: Vec<ExtremalRun>,
    /// Lipschitz modulus `l` of `x -> F(t, x)`.
    pub lipschitz: f64,
    /// Radius `M` in the near-target slack `eps / (2 M b)`.
    pub radius: f64,
    /// `sup |F^(t, x)|`, analytic when available, otherwise sampled along the runs.
    pub eta_max: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RelaxOptions {
    /// Near-target slack; `1/n` for the n-th run when absent.
    pub eps: Option<f64>,
}

/// Strong relaxation: for each `delta` chatter around the near-target selection
/// of the convex forcing `h`, solve the Cauchy problem from `u(0)`, re-select
/// once against the new trajectory and record the gaps.
pub fn relax_approximate(
    evo: &Evolution,
    f: &MultimapSpec,
    u: &Trajectory,
    h: &ForcingPath,
    deltas: &[f64],
    opts: &RelaxOptions,
) -> Result<RelaxationRun> {
    if deltas.is_empty() {
        return Err(Error::param("deltas", "schedule is empty"));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("deltas", "schedule must be strictly decreasing"));
    }
    let grid = *u.grid();
    for &d in deltas {
        window_steps(&grid, d)?;
    }
    let radius = f
        .truncation
        .or(f.hartman_radius)
        .unwrap_or_else(|| u.sup_norm().max(1.0));
    let x0 = u.initial().clone();
    let mut runs = Vec::with_capacity(deltas.len());
    for (idx, &delta) in deltas.iter().enumerate() {
        let eps = opts.eps.unwrap_or(1.0 / (idx + 1) as f64);
        let tagged = |e: Error| Error::stage(format!("delta={delta}"), e);
        let sel = Selection::near_target(h.clone(), eps, radius, grid.b()).map_err(tagged)?;
        let gamma = select_path(f, &sel, u).map_err(tagged)?;
        let beta = chatter(f, u, &gamma, delta).map_err(tagged)?;
        let first = evo.solve_cauchy(&grid, &x0, &beta).map_err(tagged)?;
        let gamma = select_path(f, &sel, &first).map_err(tagged)?;
        let beta = chatter(f, &first, &gamma, delta).map_err(tagged)?;
        let traj = evo.solve_cauchy(&grid, &x0, &beta).map_err(tagged)?;
        // Re-select along the final trajectory so the gap estimates refer to it.
        let gamma = select_path(f, &sel, &traj).map_err(tagged)?;
        let weak_gap = weak_norm(&beta.difference(&gamma)?);
        runs.push(ExtremalRun {
            delta,
            sup_gap: sup_distance(&traj, u)?,
            refresh_residual: sup_distance(&traj, &first)?,
            trajectory: traj,
            forcing: beta,
            target: gamma,
            weak_gap,
            eps,
        });
    }
    let eta_max = match f.truncated_bound(u.space()) {
        Some(b) => b,
        None => {
            let mut all: Vec<&Trajectory> = runs.iter().map(|r| &r.trajectory).collect();
            all.push(u);
            sampled_bound(f, &grid, &all)?
        }
    };
    Ok(RelaxationRun {
        convex_solution: u.clone(),
        convex_forcing: h.clone(),
        extremal_runs: runs,
        lipschitz: f.lipschitz(),
        radius,
        eta_max,
    })
}

fn run_bound(run: &RelaxationRun, r: &ExtremalRun) -> f64 {
    let u = &run.convex_solution;
    let grid = u.grid();
    let space = u.space();
    let tau = grid.tau();
    let b = grid.b();
    let n = grid.n_steps();
    let mut pairing = 0.0;
    let mut worst_pairing: f64 = 0.0;
    let mut slack = 0.0;
    let mut growth = 1.0;
    for k in 0..n {
        let diff: Vec<f64> = r
            .trajectory
            .state(k + 1)
            .as_slice()
            .iter()
            .zip(u.state(k + 1).as_slice())
            .map(|(a, c)| a - c)
            .collect();
        let gb: Vec<f64> = r
            .forcing
            .value(k)
            .as_slice()
            .iter()
            .zip(r.target.value(k).as_slice())
            .map(|(x, y)| x - y)
            .collect();
        pairing += tau * space.inner(&gb, &diff);
        worst_pairing = worst_pairing.max(pairing.abs());
        slack += tau * space.norm_of(&diff) * r.eps / (2.0 * run.radius * b);
        let q = 1.0 - 2.0 * tau * run.lipschitz;
        growth = if q > 0.0 { growth / q } else { f64::INFINITY };
    }
    (growth * (2.0 * worst_pairing + 2.0 * slack)).sqrt()
}

/// Discrete Gronwall prediction for each run's `sup_gap`:
/// `sqrt(G (2 max_K |tau sum_{k<K} (beta_k - gamma_k, u_n - u)| + 2 eps_n / (2 M b) tau sum |u_n - u|))`
/// with `G = prod (1 - 2 tau l)^{-1}`.
pub fn gronwall_gap_bounds(run: &RelaxationRun) -> Vec<f64> {
    run.extremal_runs.iter().map(|r| run_bound(run, r)).collect()
}

/// Bound for a single run of the schedule.
pub fn gronwall_gap_bound(run: &RelaxationRun, index: usize) -> Option<f64> {
    run.extremal_runs.get(index).map(|r| run_bound(run, r))
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxationRow {
    pub delta: f64,
    pub weak_gap: f64,
    pub sup_gap: f64,
    pub gronwall_bound: f64,
}

pub fn relaxation_rows(run: &RelaxationRun) -> Vec<RelaxationRow> {
    run.extremal_runs
        .iter()
        .zip(gronwall_gap_bounds(run))
        .map(|(r, g)| RelaxationRow {
            delta: r.delta,
            weak_gap: r.weak_gap,
            sup_gap: r.sup_gap,
            gronwall_bound: g,
        })
        .collect()
}

/// CSV with columns `delta,weak_gap,sup_gap,gronwall_bound`.
pub fn relaxation_csv(run: &RelaxationRun) -> String {
    let mut s = String::from("delta,weak_gap,sup_gap,gronwall_bound\n");
    for row in relaxation_rows(run) {
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            row.delta, row.weak_gap, row.sup_gap, row.gronwall_bound
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::StepConfig;
    use crate::grid::SpaceGrid;
    use crate::monotone::{OperatorSpec, PhiSpec};
    use crate::set_valued::{path_extremal_deviation, ControlShape, Drift, GainField};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scalar_setup(n: usize) -> (TimeGrid, SpaceGrid, Trajectory) {
        let g = TimeGrid::new(1.0, n).unwrap();
        let s = SpaceGrid::scalar();
        let u = Trajectory::constant(g, s, &StateVector::scalar(0.0)).unwrap();
        (g, s, u)
    }

    fn evo() -> Evolution {
        Evolution::new(
            SpaceGrid::scalar(),
            OperatorSpec::scalar_linear(1.0).unwrap(),
            PhiSpec::zero(),
            StepConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_target_alternates_half_windows() {
        let (g, s, u) = scalar_setup(100);
        let f = MultimapSpec::interval(-1.0, 1.0).unwrap();
        let beta = chatter(&f, &u, &ForcingPath::zeros(g, s), 0.1).unwrap();
        for k in 0..100 {
            let expected = if k % 10 < 5 { 1.0 } else { -1.0 };
            assert_eq!(beta.value(k).as_slice()[0], expected, "step {k}");
        }
        assert_relative_eq!(weak_norm(&beta), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn vertex_target_returned_unchanged() {
        let (g, s, u) = scalar_setup(60);
        let f = MultimapSpec::interval(-1.0, 1.0).unwrap();
        let target = ForcingPath::from_fn(g, s, |t| StateVector::scalar(if (t * 7.0).sin() > 0.0 { 1.0 } else { -1.0 })).unwrap();
        let beta = chatter(&f, &u, &target, 0.1).unwrap();
        assert_eq!(beta, target);
        assert_eq!(weak_norm(&beta.difference(&target).unwrap()), 0.0);
    }

    #[test]
    fn half_target_fills_three_quarters() {
        let (g, s, u) = scalar_setup(400);
        let f = MultimapSpec::interval(-1.0, 1.0).unwrap();
        let target = ForcingPath::constant(g, s, &StateVector::scalar(0.5)).unwrap();
        let beta = chatter(&f, &u, &target, 0.1).unwrap();
        let ups = (0..40).filter(|&k| beta.value(k).as_slice()[0] > 0.0).count();
        assert_eq!(ups, 30);
        // Window integrals match exactly, so the prefix gap vanishes at window ends.
        let prefix = beta.difference(&target).unwrap().prefix_integrals();
        for w in 0..=10 {
            assert!(prefix[40 * w][0].abs() < 1e-12);
        }
        assert!(weak_norm(&beta.difference(&target).unwrap()) <= 0.1 * 2.0 + 1e-12);
    }

    #[test]
    fn misaligned_delta_rejected() {
        let (g, s, u) = scalar_setup(100);
        let f = MultimapSpec::interval(-1.0, 1.0).unwrap();
        assert!(chatter(&f, &u, &ForcingPath::zeros(g, s), 0.015).is_err());
        assert!(chatter(&f, &u, &ForcingPath::zeros(g, s), 0.0).is_err());
    }

    #[test]
    fn singleton_map_gives_zero_gaps() {
        let (g, s, u) = scalar_setup(200);
        let f = MultimapSpec::single_valued(Drift::Zero);
        let h = ForcingPath::zeros(g, s);
        let run = relax_approximate(&evo(), &f, &u, &h, &[0.1, 0.05], &RelaxOptions::default()).unwrap();
        for r in &run.extremal_runs {
            assert_eq!(r.sup_gap, 0.0);
            assert_eq!(r.weak_gap, 0.0);
        }
        assert_eq!(gronwall_gap_bounds(&run), vec![0.0, 0.0]);
    }

    #[test]
    fn alternating_benchmark_halves_and_is_bounded() {
        let (_, _, u) = scalar_setup(1600);
        let f = MultimapSpec::interval(-1.0, 1.0).unwrap();
        let h = ForcingPath::zeros(*u.grid(), *u.space());
        let run = relax_approximate(&evo(), &f, &u, &h, &[0.1, 0.05, 0.025], &RelaxOptions::default()).unwrap();
        let gaps: Vec<f64> = run.extremal_runs.iter().map(|r| r.sup_gap).collect();
        for w in gaps.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..=2.4).contains(&ratio), "{gaps:?}");
        }
        for (r, bound) in run.extremal_runs.iter().zip(gronwall_gap_bounds(&run)) {
            assert!(bound >= r.sup_gap, "{bound} < {}", r.sup_gap);
            assert!(r.weak_gap <= r.delta * 2.0 * run.eta_max);
        }
        let csv = relaxation_csv(&run);
        assert!(csv.starts_with("delta,weak_gap,sup_gap,gronwall_bound\n"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn zero_lipschitz_bound_is_pairing_term() {
        let (_, _, u) = scalar_setup(400);
        let f = MultimapSpec::interval(-1.0, 1.0).unwrap();
        let h = ForcingPath::zeros(*u.grid(), *u.space());
        let run = relax_approximate(&evo(), &f, &u, &h, &[0.1], &RelaxOptions::default()).unwrap();
        assert_eq!(run.lipschitz, 0.0);
        let r = &run.extremal_runs[0];
        let tau = u.grid().tau();
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        let mut slack = 0.0;
        for k in 0..400 {
            let d = r.trajectory.state(k + 1).as_slice()[0];
            acc += tau * (r.forcing.value(k).as_slice()[0] - r.target.value(k).as_slice()[0]) * d;
            worst = worst.max(acc.abs());
            slack += tau * d.abs() * r.eps / (2.0 * run.radius);
        }
        assert_relative_eq!(gronwall_gap_bounds(&run)[0], (2.0 * worst + 2.0 * slack).sqrt(), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn chatter_output_is_extremal(target in prop::collection::vec(-3.0..3.0f64, 120),
                                      m in 1usize..12, gain in 0.1..2.0f64, slope in -1.0..1.0f64) {
            let g = TimeGrid::new(1.2, 120).unwrap();
            let s = SpaceGrid::scalar();
            let f = MultimapSpec::new(Drift::Linear { slope }, ControlShape::Box { radius: 1.0 }, GainField::Uniform { value: gain }).unwrap();
            let u = Trajectory::from_fn(g, s, |t| StateVector::scalar(t.cos())).unwrap();
            let target = ForcingPath::new(g, s, target.into_iter().map(StateVector::scalar).collect()).unwrap();
            let delta = m as f64 * g.tau();
            let beta = chatter(&f, &u, &target, delta).unwrap();
            prop_assert!(path_extremal_deviation(&f, &beta, &u).unwrap() <= 1e-12);
            // Certificate against the projected target.
            let sel = Selection::near_target(target, 1.0, 1.0, 1.2).unwrap();
            let gamma = select_path(&f, &sel, &u).unwrap();
            let eta = sampled_bound(&f, &g, &[&u]).unwrap();
            prop_assert!(weak_norm(&beta.difference(&gamma).unwrap()) <= delta * 2.0 * eta + 1e-12);
        }
    }
}
