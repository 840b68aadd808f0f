//! Backward Euler for `-u' in A(t, u) + d phi(u) + h`, `u(0) = x0`.
//!
//! Each step solves `u = prox_{tau phi}(u_prev - tau (A(t, u) + h))`, either
//! by the damped fixed-point iteration on that map or by a semismooth Newton
//! iteration on `G(u) = u - prox(...)`. Both stop when `|G(u)| <= inner_tol`,
//! so the returned state satisfies the discrete inclusion with defect at most
//! `inner_tol / tau`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{sup_distance, ForcingPath, SpaceGrid, StateVector, TimeGrid, Trajectory};
use crate::linalg::Banded;
use crate::monotone::{OperatorSpec, PhiSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMethod {
    FixedPointProx,
    DampedNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepConfig {
    pub inner_max_iter: usize,
    pub inner_tol: f64,
    pub inner_method: InnerMethod,
    pub damping: f64,
    /// Number of times a failing step may be split in half.
    pub max_halvings: u32,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            inner_max_iter: 500,
            inner_tol: 1e-10,
            inner_method: InnerMethod::FixedPointProx,
            damping: 1.0,
            max_halvings: 6,
        }
    }
}

impl StepConfig {
    pub fn newton() -> Self {
        Self {
            inner_method: InnerMethod::DampedNewton,
            inner_max_iter: 100,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inner_tol > 0.0) {
            return Err(Error::param("solver.inner_tol", "must be positive"));
        }
        if self.inner_max_iter == 0 {
            return Err(Error::param("solver.inner_max_iter", "must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::param("solver.damping", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// The deterministic part of the inclusion: space, `A`, `phi` and the step solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub space: SpaceGrid,
    pub op: OperatorSpec,
    pub phi: PhiSpec,
    pub step: StepConfig,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: StateVector,
    /// `|G(u)|`, the fixed-point residual of the returned state.
    pub residual: f64,
    pub iterations: usize,
}

/// Diagnostics collected while integrating one Cauchy problem.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CauchyStats {
    pub max_residual: f64,
    pub total_iterations: usize,
    pub halvings: usize,
}

impl Evolution {
    pub fn new(space: SpaceGrid, op: OperatorSpec, phi: PhiSpec, step: StepConfig) -> Result<Self> {
        step.validate()?;
        Ok(Self { space, op, phi, step })
    }

    /// `G(u) = u - prox(u_prev - tau (A(t, u) + h))` together with the prox
    /// derivative at its argument.
    fn residual_map(
        &self,
        t: f64,
        tau: f64,
        u_prev: &StateVector,
        h: &StateVector,
        u: &StateVector,
    ) -> Result<(StateVector, Vec<f64>)> {
        let au = self.op.apply(t, u, &self.space)?;
        let mut g = Vec::with_capacity(u.len());
        let mut deriv = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            let w = u_prev.as_slice()[i] - tau * (au.as_slice()[i] + h.as_slice()[i]);
            let (y, d) = self.phi.resolve(tau, w);
            g.push(u.as_slice()[i] - y);
            deriv.push(d);
        }
        let g = StateVector::new(g)?;
        Ok((g, deriv))
    }

    /// One more inner update once the tolerance is met, kept only if it lowers
    /// the residual. Keeps accumulated step errors well below `inner_tol`.
    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        t: f64,
        tau: f64,
        u_prev: &StateVector,
        h: &StateVector,
        u: StateVector,
        g: StateVector,
        deriv: &[f64],
        r: f64,
        iterations: usize,
    ) -> StepResult {
        let polished = match self.step.inner_method {
            InnerMethod::FixedPointProx => Some(u.axpy(-self.step.damping, &g)),
            InnerMethod::DampedNewton => self
                .newton_direction(t, tau, &u, &g, deriv)
                .ok()
                .map(|d| u.axpy(-1.0, &d)),
        };
        if let Some(next) = polished {
            if let Ok((gn, _)) = self.residual_map(t, tau, u_prev, h, &next) {
                let rn = self.space.norm_of(gn.as_slice());
                if rn <= r {
                    return StepResult {
                        state: next,
                        residual: rn,
                        iterations: iterations + 1,
                    };
                }
            }
        }
        StepResult {
            state: u,
            residual: r,
            iterations,
        }
    }

    /// Solves `(I + tau D J_A) delta = G` with `D` the prox derivative.
    fn newton_direction(
        &self,
        t: f64,
        tau: f64,
        u: &StateVector,
        g: &StateVector,
        deriv: &[f64],
    ) -> Result<StateVector> {
        let mut jac = self.op.jacobian(t, u, &self.space);
        let n = u.len();
        let w = self.space.bandwidth();
        for (i, d) in deriv.iter().enumerate() {
            jac.scale_row(i, tau * d);
        }
        let mut sys = Banded::identity(n, w);
        for i in 0..n {
            for j in i.saturating_sub(w)..(i + w + 1).min(n) {
                let v = jac.get(i, j);
                if v != 0.0 {
                    sys.add(i, j, v);
                }
            }
        }
        StateVector::new(sys.solve(g.as_slice())?)
    }

    fn solve_step(
        &self,
        t: f64,
        tau: f64,
        u_prev: &StateVector,
        h: &StateVector,
        warm: &StateVector,
    ) -> Result<StepResult> {
        let cfg = &self.step;
        let mut u = warm.clone();
        let mut last = f64::INFINITY;
        let mut growth = 0;
        for it in 0..cfg.inner_max_iter {
            let (g, deriv) = self.residual_map(t, tau, u_prev, h, &u)?;
            let r = self.space.norm_of(g.as_slice());
            if r <= cfg.inner_tol {
                return Ok(self.finish(t, tau, u_prev, h, u, g, &deriv, r, it));
            }
            match cfg.inner_method {
                InnerMethod::FixedPointProx => {
                    // Residual ratios at or above one mean the inner map is not contracting.
                    if r >= last {
                        growth += 1;
                        if growth >= 3 {
                            return Err(Error::InnerNonconvergence {
                                residual: r,
                                iterations: it,
                            });
                        }
                    } else {
                        growth = 0;
                    }
                    u = u.axpy(-cfg.damping, &g);
                }
                InnerMethod::DampedNewton => {
                    let delta = self.newton_direction(t, tau, &u, &g, &deriv)?;
                    let mut s = cfg.damping;
                    let mut accepted = None;
                    for _ in 0..30 {
                        let trial = u.axpy(-s, &delta);
                        let (gt, _) = self.residual_map(t, tau, u_prev, h, &trial)?;
                        let rt = self.space.norm_of(gt.as_slice());
                        if rt < r || rt <= cfg.inner_tol {
                            accepted = Some(trial);
                            break;
                        }
                        s *= 0.5;
                    }
                    match accepted {
                        Some(next) => u = next,
                        None => {
                            return Err(Error::InnerNonconvergence {
                                residual: r,
                                iterations: it,
                            })
                        }
                    }
                }
            }
            last = r;
        }
        let (g, deriv) = self.residual_map(t, tau, u_prev, h, &u)?;
        let r = self.space.norm_of(g.as_slice());
        if r <= cfg.inner_tol {
            return Ok(self.finish(t, tau, u_prev, h, u, g, &deriv, r, cfg.inner_max_iter));
        }
        Err(Error::InnerNonconvergence {
            residual: r,
            iterations: cfg.inner_max_iter,
        })
    }

    /// One backward Euler step ending at time `t`, warm-started at `u_prev`.
    pub fn implicit_step(
        &self,
        t: f64,
        tau: f64,
        u_prev: &StateVector,
        h_k: &StateVector,
    ) -> Result<StepResult> {
        if !(tau > 0.0) {
            return Err(Error::param("tau", format!("must be positive, got {tau}")));
        }
        self.space.check(u_prev)?;
        self.space.check(h_k)?;
        self.solve_step(t, tau, u_prev, h_k, u_prev)
    }

    /// Step from `t_prev` to `t_prev + tau`, splitting it when the inner solve fails.
    fn advance(
        &self,
        t_prev: f64,
        tau: f64,
        u_prev: &StateVector,
        h: &StateVector,
        warm: &StateVector,
        depth: u32,
        stats: &mut CauchyStats,
    ) -> Result<StateVector> {
        match self.solve_step(t_prev + tau, tau, u_prev, h, warm) {
            Ok(res) => {
                stats.max_residual = stats.max_residual.max(res.residual);
                stats.total_iterations += res.iterations;
                Ok(res.state)
            }
            Err(Error::InnerNonconvergence { .. }) if depth < self.step.max_halvings => {
                stats.halvings += 1;
                let half = 0.5 * tau;
                let mid = self.advance(t_prev, half, u_prev, h, u_prev, depth + 1, stats)?;
                self.advance(t_prev + half, half, &mid, h, &mid, depth + 1, stats)
            }
            Err(e) => Err(e),
        }
    }

    fn integrate(
        &self,
        grid: &TimeGrid,
        x0: &StateVector,
        h: &ForcingPath,
        mut warm: impl FnMut(&StateVector) -> StateVector,
    ) -> Result<(Trajectory, CauchyStats)> {
        self.space.check(x0)?;
        if h.grid() != grid || h.space() != &self.space {
            return Err(Error::Domain("forcing path does not match the grids".into()));
        }
        let tau = grid.tau();
        let mut stats = CauchyStats::default();
        let mut states = Vec::with_capacity(grid.n_steps() + 1);
        states.push(x0.clone());
        for k in 0..grid.n_steps() {
            let prev = &states[k];
            let start = warm(prev);
            let next = self
                .advance(grid.time(k), tau, prev, h.value(k), &start, 0, &mut stats)
                .map_err(|e| Error::Step {
                    step: k,
                    source: Box::new(e),
                })?;
            states.push(next);
        }
        Ok((Trajectory::new(*grid, self.space, states)?, stats))
    }

    /// Integrates the Cauchy problem over the whole grid; `states[0] = x0`.
    pub fn solve_cauchy(&self, grid: &TimeGrid, x0: &StateVector, h: &ForcingPath) -> Result<Trajectory> {
        Ok(self.integrate(grid, x0, h, |p| p.clone())?.0)
    }

    pub fn solve_cauchy_with_stats(
        &self,
        grid: &TimeGrid,
        x0: &StateVector,
        h: &ForcingPath,
    ) -> Result<(Trajectory, CauchyStats)> {
        self.integrate(grid, x0, h, |p| p.clone())
    }

    /// Re-solves with randomized inner warm starts and reports the largest
    /// pairwise sup distance between the resulting trajectories.
    pub fn verify_uniqueness(
        &self,
        grid: &TimeGrid,
        x0: &StateVector,
        h: &ForcingPath,
        n_restarts: usize,
        seed: u64,
    ) -> Result<UniquenessReport> {
        if n_restarts < 2 {
            return Err(Error::param("n_restarts", "need at least two restarts"));
        }
        let mut runs = vec![self.solve_cauchy(grid, x0, h)?];
        for r in 1..n_restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let (traj, _) = self.integrate(grid, x0, h, |prev| {
                let scale = 0.1 * (1.0 + prev.max_abs());
                StateVector::from_vec_unchecked(
                    prev.as_slice()
                        .iter()
                        .map(|v| v + scale * rng.random_range(-1.0..1.0))
                        .collect(),
                )
            })?;
            runs.push(traj);
        }
        let mut worst: f64 = 0.0;
        for i in 0..runs.len() {
            for j in i + 1..runs.len() {
                worst = worst.max(sup_distance(&runs[i], &runs[j])?);
            }
        }
        Ok(UniquenessReport {
            restarts: n_restarts,
            max_pairwise_distance: worst,
            within_contract: worst <= 10.0 * self.step.inner_tol,
        })
    }

    /// `max_k |(u_k - u_{k+1}) / tau - A(t_{k+1}, u_{k+1}) - g_{k+1} - h_k|`
    /// with `g_{k+1}` recovered from the prox identity. Equals `max_k |G(u_{k+1})| / tau`.
    pub fn inclusion_defect(&self, u: &Trajectory, h: &ForcingPath) -> Result<f64> {
        let grid = u.grid();
        let tau = grid.tau();
        let mut worst: f64 = 0.0;
        for k in 0..grid.n_steps() {
            let (g, _) = self.residual_map(grid.time(k + 1), tau, u.state(k), h.value(k), u.state(k + 1))?;
            worst = worst.max(self.space.norm_of(g.as_slice()) / tau);
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub restarts: usize,
    pub max_pairwise_distance: f64,
    pub within_contract: bool,
}
