//! Time and space grids, trajectories, forcings and the norms used throughout
//! the solver.
//!
//! States live on the interior nodes of a uniform grid with homogeneous
//! Dirichlet data; the H inner product is the cell-volume weighted dot
//! product. Forcings are piecewise constant in time: `values[k]` acts on the
//! step `(t_k, t_{k+1}]`.

use std::fmt::Write as _;
use std::io::Write;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Uniform discretization of `[0, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    b: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(b: f64, n_steps: usize) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::param("b", format!("period must be positive, got {b}")));
        }
        if n_steps < 2 {
            return Err(Error::param("n_steps", format!("need at least 2 steps, got {n_steps}")));
        }
        Ok(Self { b, n_steps })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn tau(&self) -> f64 {
        self.b / self.n_steps as f64
    }

    /// Time of grid index `k`; index `n_steps` maps to `b` exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.b
        } else {
            self.b * k as f64 / self.n_steps as f64
        }
    }

    /// Nearest grid index to `t`, clamped to `[0, n_steps]`.
    pub fn index_of(&self, t: f64) -> usize {
        let k = (t / self.tau()).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_steps)
        }
    }

    /// Index of the forcing step whose right endpoint is `t` (step 0 for `t = 0`).
    pub fn step_ending_at(&self, t: f64) -> usize {
        self.index_of(t).saturating_sub(1)
    }

    pub fn refine(&self, factor: usize) -> Result<Self> {
        Self::new(self.b, self.n_steps * factor)
    }
}

/// Uniform spatial discretization. `Euclidean` is plain `R^n` with unit
/// weights; `Line` and `Plane` carry interior nodes of a box with zero
/// Dirichlet boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceGrid {
    Euclidean { dim: usize },
    Line { extent: f64, nodes: usize },
    Plane { extent: [f64; 2], nodes: [usize; 2] },
}

/// A gradient edge between two nodes; `None` marks the Dirichlet boundary.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Edge {
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub h: f64,
}

impl SpaceGrid {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("space.dim", "need at least one component"));
        }
        Ok(SpaceGrid::Euclidean { dim })
    }

    pub fn scalar() -> Self {
        SpaceGrid::Euclidean { dim: 1 }
    }

    pub fn line(extent: f64, nodes: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::param("space.extent", format!("must be positive, got {extent}")));
        }
        if nodes == 0 {
            return Err(Error::param("space.nodes", "need at least one interior node"));
        }
        Ok(SpaceGrid::Line { extent, nodes })
    }

    /// Line with prescribed mesh width `h` and `nodes` interior nodes.
    pub fn line_with_width(h: f64, nodes: usize) -> Result<Self> {
        Self::line(h * (nodes + 1) as f64, nodes)
    }

    pub fn plane(extent: [f64; 2], nodes: [usize; 2]) -> Result<Self> {
        for axis in 0..2 {
            if !(extent[axis].is_finite() && extent[axis] > 0.0) {
                return Err(Error::param("space.extent", format!("must be positive, got {}", extent[axis])));
            }
            if nodes[axis] == 0 {
                return Err(Error::param("space.nodes", "need at least one interior node per axis"));
            }
        }
        Ok(SpaceGrid::Plane { extent, nodes })
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        match *self {
            SpaceGrid::Euclidean { dim } => dim,
            SpaceGrid::Line { nodes, .. } => nodes,
            SpaceGrid::Plane { nodes, .. } => nodes[0] * nodes[1],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mesh_widths(&self) -> Vec<f64> {
        match *self {
            SpaceGrid::Euclidean { .. } => vec![],
            SpaceGrid::Line { extent, nodes } => vec![extent / (nodes + 1) as f64],
            SpaceGrid::Plane { extent, nodes } => vec![
                extent[0] / (nodes[0] + 1) as f64,
                extent[1] / (nodes[1] + 1) as f64,
            ],
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.mesh_widths().iter().product()
    }

    /// Total measure of the domain as seen by the H inner product.
    pub fn total_volume(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }

    pub fn is_spatial(&self) -> bool {
        !matches!(self, SpaceGrid::Euclidean { .. })
    }

    /// Physical coordinates of node `i` (zeros for `Euclidean`).
    pub fn coordinates(&self, i: usize) -> [f64; 2] {
        match *self {
            SpaceGrid::Euclidean { .. } => [0.0, 0.0],
            SpaceGrid::Line { .. } => {
                let h = self.mesh_widths()[0];
                [(i + 1) as f64 * h, 0.0]
            }
            SpaceGrid::Plane { nodes, .. } => {
                let w = self.mesh_widths();
                let (ix, iy) = (i % nodes[0], i / nodes[0]);
                [(ix + 1) as f64 * w[0], (iy + 1) as f64 * w[1]]
            }
        }
    }

    /// Half bandwidth of the nearest-neighbour stencil in node ordering.
    pub(crate) fn bandwidth(&self) -> usize {
        match *self {
            SpaceGrid::Euclidean { .. } => 0,
            SpaceGrid::Line { .. } => 1,
            SpaceGrid::Plane { nodes, .. } => nodes[0],
        }
    }

    /// Gradient edges of the one-sided difference stencil with zero extension.
    /// `Euclidean` has none.
    pub(crate) fn edges(&self) -> Vec<Edge> {
        match *self {
            SpaceGrid::Euclidean { .. } => Vec::new(),
            SpaceGrid::Line { nodes, .. } => {
                let h = self.mesh_widths()[0];
                (0..=nodes)
                    .map(|e| Edge {
                        left: e.checked_sub(1),
                        right: (e < nodes).then_some(e),
                        h,
                    })
                    .collect()
            }
            SpaceGrid::Plane { nodes, .. } => {
                let w = self.mesh_widths();
                let [mx, my] = nodes;
                let idx = |ix: usize, iy: usize| iy * mx + ix;
                let mut edges = Vec::with_capacity((mx + 1) * my + mx * (my + 1));
                for iy in 0..my {
                    for e in 0..=mx {
                        edges.push(Edge {
                            left: e.checked_sub(1).map(|ix| idx(ix, iy)),
                            right: (e < mx).then(|| idx(e, iy)),
                            h: w[0],
                        });
                    }
                }
                for ix in 0..mx {
                    for e in 0..=my {
                        edges.push(Edge {
                            left: e.checked_sub(1).map(|iy| idx(ix, iy)),
                            right: (e < my).then(|| idx(ix, e)),
                            h: w[1],
                        });
                    }
                }
                edges
            }
        }
    }

    pub(crate) fn weight(&self) -> f64 {
        match self {
            SpaceGrid::Euclidean { .. } => 1.0,
            _ => self.cell_volume(),
        }
    }

    /// Weighted inner product of two raw slices of matching length.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.weight() * x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
    }

    pub(crate) fn norm_of(&self, x: &[f64]) -> f64 {
        self.inner(x, x).sqrt()
    }

    pub(crate) fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (self.weight() * s).sqrt()
    }

    pub(crate) fn check(&self, x: &StateVector) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// An element of the discretized state space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    /// Rejects non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow(format!("non-finite entry at index {i}")));
        }
        Ok(Self(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn scalar(value: f64) -> Self {
        Self(vec![value])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &StateVector) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + alpha * b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: &StateVector) -> StateVector {
        StateVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: &StateVector) -> StateVector {
        StateVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &StateVector {
    type Output = StateVector;
    fn mul(self, rhs: f64) -> StateVector {
        StateVector(self.0.iter().map(|a| a * rhs).collect())
    }
}

impl From<f64> for StateVector {
    fn from(v: f64) -> Self {
        StateVector::scalar(v)
    }
}

/// `sqrt(sum x_i^2 * cell volume)`
pub fn h_norm(x: &StateVector, grid: &SpaceGrid) -> Result<f64> {
    grid.check(x)?;
    Ok(grid.norm_of(x.as_slice()))
}

/// Discrete `||D u||_p` with one-sided differences and zero boundary values.
/// On `Euclidean` spaces there is no gradient and the plain `l^p` norm is used.
pub fn x_norm(x: &StateVector, grid: &SpaceGrid, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::param("p", format!("need p >= 2, got {p}")));
    }
    grid.check(x)?;
    let u = x.as_slice();
    let sum: f64 = match grid {
        SpaceGrid::Euclidean { .. } => u.iter().map(|v| v.abs().powf(p)).sum(),
        _ => {
            let vol = grid.cell_volume();
            grid.edges()
                .iter()
                .map(|e| vol * edge_difference(u, e).abs().powf(p))
                .sum()
        }
    };
    Ok(sum.powf(1.0 / p))
}

pub(crate) fn edge_difference(u: &[f64], e: &Edge) -> f64 {
    let r = e.right.map_or(0.0, |i| u[i]);
    let l = e.left.map_or(0.0, |i| u[i]);
    (r - l) / e.h
}

/// Time-indexed states; `states[k]` sits at `k * tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    space: SpaceGrid,
    states: Vec<StateVector>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, space: SpaceGrid, states: Vec<StateVector>) -> Result<Self> {
        if states.len() != grid.n_steps() + 1 {
            return Err(Error::Dimension {
                expected: grid.n_steps() + 1,
                found: states.len(),
            });
        }
        for s in &states {
            space.check(s)?;
        }
        Ok(Self { grid, space, states })
    }

    pub fn constant(grid: TimeGrid, space: SpaceGrid, state: &StateVector) -> Result<Self> {
        Self::new(grid, space, vec![state.clone(); grid.n_steps() + 1])
    }

    pub fn from_fn(grid: TimeGrid, space: SpaceGrid, f: impl Fn(f64) -> StateVector) -> Result<Self> {
        Self::new(grid, space, (0..=grid.n_steps()).map(|k| f(grid.time(k))).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &StateVector {
        &self.states[k]
    }

    pub fn initial(&self) -> &StateVector {
        &self.states[0]
    }

    pub fn last(&self) -> &StateVector {
        &self.states[self.grid.n_steps()]
    }

    /// `|u(b) - u(0)|`
    pub fn periodicity_residual(&self) -> f64 {
        self.space.distance(self.last().as_slice(), self.initial().as_slice())
    }

    /// `max_k |u(t_k)|`
    pub fn sup_norm(&self) -> f64 {
        self.states
            .iter()
            .map(|s| self.space.norm_of(s.as_slice()))
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            space: self.space,
            states: self.states.iter().map(|s| s * factor).collect(),
        }
    }

    /// CSV with header `t,node_0,...,node_{m-1}`, one row per time index.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(self.to_csv().as_bytes())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.space.len() {
            let _ = write!(s, ",node_{i}");
        }
        s.push('\n');
        for (k, state) in self.states.iter().enumerate() {
            let _ = write!(s, "{:.16e}", self.grid.time(k));
            for v in state.as_slice() {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Piecewise-constant forcing; `values[k]` acts on `(t_k, t_{k+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingPath {
    grid: TimeGrid,
    space: SpaceGrid,
    values: Vec<StateVector>,
}

impl ForcingPath {
    pub fn new(grid: TimeGrid, space: SpaceGrid, values: Vec<StateVector>) -> Result<Self> {
        if values.len() != grid.n_steps() {
            return Err(Error::Dimension {
                expected: grid.n_steps(),
                found: values.len(),
            });
        }
        for v in &values {
            space.check(v)?;
            if !v.is_finite() {
                return Err(Error::NumericOverflow("non-finite forcing value".into()));
            }
        }
        Ok(Self { grid, space, values })
    }

    pub fn zeros(grid: TimeGrid, space: SpaceGrid) -> Self {
        Self {
            grid,
            space,
            values: vec![StateVector::zeros(space.len()); grid.n_steps()],
        }
    }

    pub fn constant(grid: TimeGrid, space: SpaceGrid, value: &StateVector) -> Result<Self> {
        Self::new(grid, space, vec![value.clone(); grid.n_steps()])
    }

    /// Samples `f` at the right endpoint of every step.
    pub fn from_fn(grid: TimeGrid, space: SpaceGrid, f: impl Fn(f64) -> StateVector) -> Result<Self> {
        Self::new(grid, space, (0..grid.n_steps()).map(|k| f(grid.time(k + 1))).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    pub fn values(&self) -> &[StateVector] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &StateVector {
        &self.values[k]
    }

    /// Value in force at grid time `t` (the step ending at `t`).
    pub fn at_time(&self, t: f64) -> &StateVector {
        &self.values[self.grid.step_ending_at(t)]
    }

    pub fn difference(&self, other: &ForcingPath) -> Result<ForcingPath> {
        self.check_same(other)?;
        Ok(Self {
            grid: self.grid,
            space: self.space,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// `(1 - theta) self + theta other`
    pub fn blend(&self, other: &ForcingPath, theta: f64) -> Result<ForcingPath> {
        self.check_same(other)?;
        Ok(Self {
            grid: self.grid,
            space: self.space,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| &(a * (1.0 - theta)) + &(b * theta))
                .collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> ForcingPath {
        Self {
            grid: self.grid,
            space: self.space,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// `int_0^b |h(s)| ds`
    pub fn l1_norm(&self) -> f64 {
        let tau = self.grid.tau();
        self.values.iter().map(|v| tau * self.space.norm_of(v.as_slice())).sum()
    }

    /// `(int_0^b |h(s)|^q ds)^(1/q)`
    pub fn lq_norm(&self, q: f64) -> f64 {
        let tau = self.grid.tau();
        let s: f64 = self
            .values
            .iter()
            .map(|v| tau * self.space.norm_of(v.as_slice()).powf(q))
            .sum();
        s.powf(1.0 / q)
    }

    /// Prefix integrals `P_k = int_0^{t_k} h`, `k = 0..=n_steps`.
    pub fn prefix_integrals(&self) -> Vec<Vec<f64>> {
        let tau = self.grid.tau();
        let mut acc = vec![0.0; self.space.len()];
        let mut out = Vec::with_capacity(self.values.len() + 1);
        out.push(acc.clone());
        for v in &self.values {
            for (a, x) in acc.iter_mut().zip(v.as_slice()) {
                *a += tau * x;
            }
            out.push(acc.clone());
        }
        out
    }

    /// CSV with header `t,node_0,...`; the row for step `k` is stamped with its
    /// right endpoint `t_{k+1}`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.space.len() {
            let _ = write!(s, ",node_{i}");
        }
        s.push('\n');
        for (k, value) in self.values.iter().enumerate() {
            let _ = write!(s, "{:.16e}", self.grid.time(k + 1));
            for v in value.as_slice() {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    fn check_same(&self, other: &ForcingPath) -> Result<()> {
        if self.grid != other.grid || self.space != other.space {
            return Err(Error::Domain("forcing paths live on different grids".into()));
        }
        Ok(())
    }
}

/// `max_k |u(t_k) - v(t_k)|`
pub fn sup_distance(u: &Trajectory, v: &Trajectory) -> Result<f64> {
    if u.grid != v.grid || u.space != v.space {
        return Err(Error::Domain("trajectories live on different grids".into()));
    }
    Ok(u.states
        .iter()
        .zip(&v.states)
        .map(|(a, b)| u.space.distance(a.as_slice(), b.as_slice()))
        .fold(0.0, f64::max))
}

/// `sup_{s <= t} | int_s^t h |` over grid-aligned pairs.
pub fn weak_norm(h: &ForcingPath) -> f64 {
    let prefix = h.prefix_integrals();
    if h.space.len() == 1 {
        // In one dimension the widest gap between prefix values is max - min.
        let (lo, hi) = prefix
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[0]), hi.max(p[0])));
        return (hi - lo) * h.space.weight().sqrt();
    }
    let mut best: f64 = 0.0;
    for i in 0..prefix.len() {
        for j in i + 1..prefix.len() {
            best = best.max(h.space.distance(&prefix[j], &prefix[i]));
        }
    }
    best
}

/// `sup_t | int_0^t h |`, the one-parameter variant of [`weak_norm`].
pub fn weak_norm_from_origin(h: &ForcingPath) -> f64 {
    h.prefix_integrals()
        .iter()
        .map(|p| h.space.norm_of(p))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two finite point sets of `R^m`.
pub fn hausdorff_finite(c: &[Vec<f64>], e: &[Vec<f64>]) -> Result<f64> {
    if c.is_empty() || e.is_empty() {
        return Err(Error::Domain("Hausdorff distance needs nonempty sets".into()));
    }
    let m = c[0].len();
    if let Some(bad) = c.iter().chain(e).find(|p| p.len() != m) {
        return Err(Error::Dimension {
            expected: m,
            found: bad.len(),
        });
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let directed = |from: &[Vec<f64>], to: &[Vec<f64>]| -> f64 {
        from.iter()
            .map(|a| to.iter().map(|b| dist(a, b)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(directed(c, e).max(directed(e, c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_grid() -> TimeGrid {
        TimeGrid::new(1.0, 10).unwrap()
    }

    #[test]
    fn time_grid_rejects_bad_input() {
        assert!(TimeGrid::new(0.0, 10).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        let g = TimeGrid::new(3.0, 7).unwrap();
        assert!((g.tau() * 7.0 - 3.0).abs() <= f64::EPSILON * 3.0);
        assert_eq!(g.time(7), 3.0);
    }

    #[test]
    fn h_norm_examples() {
        let line = SpaceGrid::line_with_width(0.5, 2).unwrap();
        assert_eq!(h_norm(&StateVector::zeros(2), &line).unwrap(), 0.0);
        assert_relative_eq!(h_norm(&StateVector::new(vec![1.0, 1.0]).unwrap(), &line).unwrap(), 1.0);
        assert_eq!(h_norm(&StateVector::scalar(3.0), &SpaceGrid::scalar()).unwrap(), 3.0);
        assert!(matches!(
            h_norm(&StateVector::zeros(3), &line),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn x_norm_examples() {
        let line = SpaceGrid::line_with_width(0.5, 1).unwrap();
        assert_relative_eq!(x_norm(&StateVector::scalar(1.0), &line, 2.0).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(x_norm(&StateVector::zeros(1), &line, 3.0).unwrap(), 0.0);
        assert!(x_norm(&StateVector::zeros(1), &line, 1.5).is_err());
    }

    #[test]
    fn x_norm_p2_is_h_norm_of_gradient() {
        let line = SpaceGrid::line(1.0, 4).unwrap();
        let u = StateVector::new(vec![0.3, -1.0, 2.0, 0.5]).unwrap();
        let h = line.mesh_widths()[0];
        let grad: Vec<f64> = line.edges().iter().map(|e| edge_difference(u.as_slice(), e)).collect();
        let grad_norm = (h * grad.iter().map(|g| g * g).sum::<f64>()).sqrt();
        assert_relative_eq!(x_norm(&u, &line, 2.0).unwrap(), grad_norm, epsilon = 1e-14);
    }

    #[test]
    fn plane_edges_cover_both_axes() {
        let plane = SpaceGrid::plane([1.0, 1.0], [3, 2]).unwrap();
        assert_eq!(plane.len(), 6);
        assert_eq!(plane.edges().len(), 4 * 2 + 3 * 3);
        assert_eq!(plane.bandwidth(), 3);
    }

    #[test]
    fn sup_distance_examples() {
        let g = scalar_grid();
        let s = SpaceGrid::scalar();
        let u = Trajectory::from_fn(g, s, |t| StateVector::scalar(t.sin())).unwrap();
        assert_eq!(sup_distance(&u, &u).unwrap(), 0.0);
        let v = Trajectory::from_fn(g, s, |t| StateVector::scalar(t.sin() + 0.25)).unwrap();
        assert_relative_eq!(sup_distance(&u, &v).unwrap(), 0.25, epsilon = 1e-15);
        let other = Trajectory::constant(TimeGrid::new(1.0, 20).unwrap(), s, &StateVector::scalar(0.0)).unwrap();
        assert!(sup_distance(&u, &other).is_err());
    }

    #[test]
    fn weak_norm_examples() {
        let g = scalar_grid();
        let s = SpaceGrid::scalar();
        let c = ForcingPath::constant(g, s, &StateVector::scalar(-2.0)).unwrap();
        assert_relative_eq!(weak_norm(&c), 2.0, epsilon = 1e-14);
        assert_eq!(weak_norm(&ForcingPath::zeros(g, s)), 0.0);
        let split = ForcingPath::from_fn(g, s, |t| StateVector::scalar(if t <= 0.5 + 1e-12 { 1.0 } else { -1.0 })).unwrap();
        assert_relative_eq!(weak_norm(&split), 0.5, epsilon = 1e-14);
        assert_relative_eq!(weak_norm_from_origin(&split), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn weak_norm_multi_component_matches_scalar_path() {
        let g = scalar_grid();
        let line = SpaceGrid::line_with_width(1.0, 1).unwrap();
        let h = ForcingPath::from_fn(g, line, |t| StateVector::scalar((7.0 * t).cos())).unwrap();
        let scalar = ForcingPath::from_fn(g, SpaceGrid::scalar(), |t| StateVector::scalar((7.0 * t).cos())).unwrap();
        assert_relative_eq!(weak_norm(&h), weak_norm(&scalar), epsilon = 1e-15);
    }

    #[test]
    fn hausdorff_examples() {
        let p = |v: f64| vec![v];
        assert_eq!(hausdorff_finite(&[p(0.0), p(2.0)], &[p(0.0), p(2.0)]).unwrap(), 0.0);
        assert_eq!(hausdorff_finite(&[p(0.0)], &[p(1.0)]).unwrap(), 1.0);
        assert_eq!(hausdorff_finite(&[p(0.0), p(2.0)], &[p(1.0)]).unwrap(), 1.0);
        assert!(hausdorff_finite(&[], &[p(1.0)]).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let s = SpaceGrid::euclidean(2).unwrap();
        let u = Trajectory::constant(g, s, &StateVector::new(vec![1.0, -0.5]).unwrap()).unwrap();
        let csv = u.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,node_0,node_1");
        assert_eq!(lines.len(), 4);
        let row: Vec<f64> = lines[3].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row, vec![1.0, 1.0, -0.5]);
    }
}
