//! Monotone operators `A(t, x)`, convex potentials given through scalar
//! maximal monotone graphs, their resolvents, and epsilon-regularization.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{edge_difference, x_norm, SpaceGrid, StateVector};
use crate::linalg::Banded;

/// A nondecreasing piecewise-linear scalar function through `knots`,
/// extended linearly beyond the end knots.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTable {
    knots: Vec<(f64, f64)>,
}

impl MonotoneTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::param("knots", "need at least two knots"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::param("knots", "abscissae must be strictly increasing"));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::param("knots", "values must be nondecreasing"));
            }
        }
        if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::param("knots", "entries must be finite"));
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn segment(&self, x: f64) -> usize {
        let last = self.knots.len() - 2;
        match self.knots.iter().position(|&(k, _)| k > x) {
            Some(0) => 0,
            Some(i) => (i - 1).min(last),
            None => last,
        }
    }

    fn slope_of(&self, seg: usize) -> f64 {
        let (x0, y0) = self.knots[seg];
        let (x1, y1) = self.knots[seg + 1];
        (y1 - y0) / (x1 - x0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let seg = self.segment(x);
        let (x0, y0) = self.knots[seg];
        y0 + self.slope_of(seg) * (x - x0)
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.slope_of(self.segment(x))
    }

    /// Solves `y + tau * eval(y) = x`; the left side is strictly increasing.
    fn resolvent(&self, tau: f64, x: f64) -> (f64, f64) {
        let g = |i: usize| self.knots[i].0 + tau * self.knots[i].1;
        let n = self.knots.len();
        let seg = if x < g(1) {
            0
        } else if x >= g(n - 2) {
            n - 2
        } else {
            (1..n - 1).find(|&i| x < g(i + 1)).unwrap_or(n - 2)
        };
        let s = self.slope_of(seg);
        let (x0, y0) = self.knots[seg];
        // y + tau (y0 + s (y - x0)) = x
        let y = (x - tau * y0 + tau * s * x0) / (1.0 + tau * s);
        (y, 1.0 / (1.0 + tau * s))
    }
}

/// `m(t) = 1 + amplitude * sin(frequency * t)`, bounded below by `1 - amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Modulation {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Modulation {
    pub fn new(amplitude: f64, frequency: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&amplitude) {
            return Err(Error::param("modulation.amplitude", "must lie in [0, 1)"));
        }
        Ok(Self { amplitude, frequency })
    }

    pub fn factor(&self, t: f64) -> f64 {
        1.0 + self.amplitude * (self.frequency * t).sin()
    }

    pub fn lower_bound(&self) -> f64 {
        1.0 - self.amplitude
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    /// `x -> a x`
    ScalarLinear { a: f64 },
    /// `-div(|Du|^{p-2} Du)` with zero Dirichlet data.
    PLaplacian { p: f64 },
    /// `-div(|Du|^{p-2} Du) - Laplacian u`
    PLaplacianPlusLaplacian { p: f64 },
    /// Nodewise `|u|^{p-2} u`.
    Power { p: f64 },
    /// Nodewise monotone table.
    Table(MonotoneTable),
}

/// Declared hypothesis constants. They are verification targets only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeclaredConstants {
    /// `<A u - A v, u - v> >= c |u - v|^2` in H.
    pub strong_monotonicity: f64,
    /// `<A u, u> >= c ||u||^p`.
    pub coercivity: f64,
    /// `||A(t,x)||_* <= a1 + c1 ||x||^{p-1}`.
    pub growth_a1: f64,
    pub growth_c1: f64,
}

impl Default for DeclaredConstants {
    fn default() -> Self {
        Self {
            strong_monotonicity: 0.0,
            coercivity: 1.0,
            growth_a1: 0.0,
            growth_c1: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub modulation: Option<Modulation>,
    /// Added `eps * u` term from regularization.
    pub shift: f64,
    pub declared: DeclaredConstants,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, declared: DeclaredConstants) -> Result<Self> {
        match &kind {
            OperatorKind::ScalarLinear { a } => {
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::param("op.a", "slope must be finite and nonnegative"));
                }
            }
            OperatorKind::PLaplacian { p }
            | OperatorKind::PLaplacianPlusLaplacian { p }
            | OperatorKind::Power { p } => {
                if !(*p >= 2.0) {
                    return Err(Error::param("op.p", format!("need p >= 2, got {p}")));
                }
            }
            OperatorKind::Table(_) => {}
        }
        if declared.coercivity <= 0.0 {
            return Err(Error::param("op.coercivity", "must be positive"));
        }
        if declared.strong_monotonicity < 0.0 {
            return Err(Error::param("op.strong_monotonicity", "must be nonnegative"));
        }
        Ok(Self {
            kind,
            modulation: None,
            shift: 0.0,
            declared,
        })
    }

    /// `x -> a x` with the matching declared constants.
    pub fn scalar_linear(a: f64) -> Result<Self> {
        Self::new(
            OperatorKind::ScalarLinear { a },
            DeclaredConstants {
                strong_monotonicity: a,
                coercivity: a.max(f64::MIN_POSITIVE),
                growth_a1: 0.0,
                growth_c1: a,
            },
        )
    }

    pub fn p_laplacian(p: f64) -> Result<Self> {
        Self::new(OperatorKind::PLaplacian { p }, DeclaredConstants::default())
    }

    pub fn power(p: f64) -> Result<Self> {
        Self::new(OperatorKind::Power { p }, DeclaredConstants::default())
    }

    pub fn with_modulation(mut self, m: Modulation) -> Self {
        self.modulation = Some(m);
        self
    }

    /// The exponent `p` of the growth and coercivity conditions.
    pub fn exponent(&self) -> f64 {
        match &self.kind {
            OperatorKind::PLaplacian { p }
            | OperatorKind::PLaplacianPlusLaplacian { p }
            | OperatorKind::Power { p } => *p,
            _ => 2.0,
        }
    }

    fn factor(&self, t: f64) -> f64 {
        self.modulation.map_or(1.0, |m| m.factor(t))
    }

    fn check_space(&self, space: &SpaceGrid) -> Result<()> {
        let needs_gradient = matches!(
            self.kind,
            OperatorKind::PLaplacian { .. } | OperatorKind::PLaplacianPlusLaplacian { .. }
        );
        if needs_gradient && !space.is_spatial() {
            return Err(Error::param("op.kind", "p-Laplacian needs a line or plane grid"));
        }
        Ok(())
    }

    /// Discrete dual action `A(t, u)`, represented as a nodal vector `a` with
    /// `<A u, v> = sum_i a_i v_i * cell volume`.
    pub fn apply(&self, t: f64, u: &StateVector, space: &SpaceGrid) -> Result<StateVector> {
        space.check(u)?;
        self.check_space(space)?;
        let x = u.as_slice();
        let mut out = match &self.kind {
            OperatorKind::ScalarLinear { a } => x.iter().map(|v| a * v).collect(),
            OperatorKind::Power { p } => x.iter().map(|&v| power_flux(*p, v)).collect(),
            OperatorKind::Table(tab) => x.iter().map(|&v| tab.eval(v)).collect(),
            OperatorKind::PLaplacian { p } => divergence(space, x, |d| power_flux(*p, d)),
            OperatorKind::PLaplacianPlusLaplacian { p } => {
                divergence(space, x, |d| power_flux(*p, d) + d)
            }
        };
        let m = self.factor(t);
        for (o, v) in out.iter_mut().zip(x) {
            *o = m * *o + self.shift * v;
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow(format!("A(t={t}, u) produced a non-finite value")));
        }
        Ok(StateVector::from_vec_unchecked(out))
    }

    /// Jacobian of [`apply`](Self::apply) in node ordering.
    pub(crate) fn jacobian(&self, t: f64, u: &StateVector, space: &SpaceGrid) -> Banded {
        let n = space.len();
        let x = u.as_slice();
        let m = self.factor(t);
        let mut jac = Banded::zeros(n, space.bandwidth());
        match &self.kind {
            OperatorKind::ScalarLinear { a } => (0..n).for_each(|i| jac.add(i, i, m * a)),
            OperatorKind::Power { p } => {
                (0..n).for_each(|i| jac.add(i, i, m * power_flux_derivative(*p, x[i])))
            }
            OperatorKind::Table(tab) => (0..n).for_each(|i| jac.add(i, i, m * tab.slope(x[i]))),
            OperatorKind::PLaplacian { p } => {
                stencil_jacobian(space, x, &mut jac, m, |d| power_flux_derivative(*p, d))
            }
            OperatorKind::PLaplacianPlusLaplacian { p } => {
                stencil_jacobian(space, x, &mut jac, m, |d| power_flux_derivative(*p, d) + 1.0)
            }
        }
        (0..n).for_each(|i| jac.add(i, i, self.shift));
        jac
    }
}

fn power_flux(p: f64, d: f64) -> f64 {
    if p == 2.0 {
        d
    } else {
        d.abs().powf(p - 2.0) * d
    }
}

fn power_flux_derivative(p: f64, d: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        (p - 1.0) * d.abs().powf(p - 2.0)
    }
}

/// Nodal `-div_h(flux(D_h u))`.
fn divergence(space: &SpaceGrid, u: &[f64], flux: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for e in space.edges() {
        let f = flux(edge_difference(u, &e)) / e.h;
        if let Some(l) = e.left {
            out[l] -= f;
        }
        if let Some(r) = e.right {
            out[r] += f;
        }
    }
    out
}

fn stencil_jacobian(
    space: &SpaceGrid,
    u: &[f64],
    jac: &mut Banded,
    scale: f64,
    dflux: impl Fn(f64) -> f64,
) {
    for e in space.edges() {
        let w = scale * dflux(edge_difference(u, &e)) / (e.h * e.h);
        match (e.left, e.right) {
            (Some(l), Some(r)) => {
                jac.add(l, l, w);
                jac.add(r, r, w);
                jac.add(l, r, -w);
                jac.add(r, l, -w);
            }
            (Some(i), None) | (None, Some(i)) => jac.add(i, i, w),
            (None, None) => {}
        }
    }
}

/// `A + eps I`; the declared strong monotonicity constant grows by `eps`.
pub fn regularize(op: &OperatorSpec, eps: f64) -> Result<OperatorSpec> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", format!("must be nonnegative, got {eps}")));
    }
    let mut out = op.clone();
    out.shift += eps;
    out.declared.strong_monotonicity += eps;
    Ok(out)
}

/// Smallest eigenvalue of the discrete Dirichlet Laplacian on a line or plane.
pub fn laplacian_first_eigenvalue(space: &SpaceGrid) -> f64 {
    let per_axis = |extent: f64, nodes: usize| {
        let h = extent / (nodes + 1) as f64;
        4.0 / (h * h) * (std::f64::consts::PI * h / (2.0 * extent)).sin().powi(2)
    };
    match *space {
        SpaceGrid::Euclidean { .. } => 0.0,
        SpaceGrid::Line { extent, nodes } => per_axis(extent, nodes),
        SpaceGrid::Plane { extent, nodes } => {
            per_axis(extent[0], nodes[0]) + per_axis(extent[1], nodes[1])
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    /// `min <A u - A v, u - v> / |u - v|^2` over non-degenerate pairs.
    pub min_monotonicity_ratio: Option<f64>,
    /// `min <A u, u> / ||u||^p` over nonzero sample points.
    pub min_coercivity_ratio: Option<f64>,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
    pub monotone: bool,
    pub strong_monotonicity_violated: bool,
    pub coercivity_violated: bool,
}

pub fn check_monotone(
    op: &OperatorSpec,
    t: f64,
    samples: &[(StateVector, StateVector)],
    space: &SpaceGrid,
) -> Result<MonotonicityReport> {
    if samples.is_empty() {
        return Err(Error::Domain("check_monotone needs at least one sample pair".into()));
    }
    let p = op.exponent();
    let mut mono: Option<f64> = None;
    let mut coer: Option<f64> = None;
    let (mut used, mut skipped) = (0, 0);
    for (u, v) in samples {
        let au = op.apply(t, u, space)?;
        let av = op.apply(t, v, space)?;
        let diff = u - v;
        let d2 = space.inner(diff.as_slice(), diff.as_slice());
        if d2 > 0.0 {
            let r = space.inner((&au - &av).as_slice(), diff.as_slice()) / d2;
            mono = Some(mono.map_or(r, |m| m.min(r)));
            used += 1;
        } else {
            skipped += 1;
        }
        for (w, aw) in [(u, &au), (v, &av)] {
            let xn = x_norm(w, space, p)?;
            if xn > 0.0 {
                let r = space.inner(aw.as_slice(), w.as_slice()) / xn.powf(p);
                coer = Some(coer.map_or(r, |c| c.min(r)));
            }
        }
    }
    let slack = |c: f64| 1e-9 * (1.0 + c.abs());
    let d = op.declared;
    Ok(MonotonicityReport {
        min_monotonicity_ratio: mono,
        min_coercivity_ratio: coer,
        pairs_used: used,
        pairs_skipped: skipped,
        monotone: mono.is_none_or(|m| m >= -slack(0.0)),
        strong_monotonicity_violated: mono
            .is_some_and(|m| m < d.strong_monotonicity - slack(d.strong_monotonicity)),
        coercivity_violated: coer.is_some_and(|c| c < d.coercivity - slack(d.coercivity)),
    })
}

/// Scalar maximal monotone graph `beta = dj`, applied nodewise.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarGraph {
    Zero,
    /// `beta(y) = slope * y`
    Linear { slope: f64 },
    /// `beta = weight * sign`, the subdifferential of `weight * |y|`.
    Abs { weight: f64 },
    /// Normal cone of `[lo, hi]`.
    Indicator { lo: f64, hi: f64 },
    /// Single-valued nondecreasing piecewise-linear graph.
    Table(MonotoneTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiSpec {
    pub graph: ScalarGraph,
    /// Declared strong monotonicity of `d phi` in H.
    pub strong_monotonicity: f64,
}

impl PhiSpec {
    pub fn new(graph: ScalarGraph) -> Result<Self> {
        let strong = match &graph {
            ScalarGraph::Linear { slope } => {
                if !(*slope >= 0.0) {
                    return Err(Error::param("phi.slope", "must be nonnegative"));
                }
                *slope
            }
            ScalarGraph::Abs { weight } => {
                if !(*weight >= 0.0) {
                    return Err(Error::param("phi.weight", "must be nonnegative"));
                }
                0.0
            }
            ScalarGraph::Indicator { lo, hi } => {
                if !(*lo <= 0.0 && 0.0 <= *hi) {
                    return Err(Error::param("phi.interval", "interval must contain 0"));
                }
                0.0
            }
            ScalarGraph::Table(t) => {
                let first = t.knots()[0].0;
                let last = t.knots()[t.knots().len() - 1].0;
                if !(first <= 0.0 && 0.0 <= last) {
                    return Err(Error::param("phi.knots", "table must cover 0"));
                }
                0.0
            }
            ScalarGraph::Zero => 0.0,
        };
        Ok(Self {
            graph,
            strong_monotonicity: strong,
        })
    }

    pub fn zero() -> Self {
        Self {
            graph: ScalarGraph::Zero,
            strong_monotonicity: 0.0,
        }
    }

    fn check_tau(tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param("tau", format!("must be positive, got {tau}")));
        }
        Ok(())
    }

    /// Scalar resolvent `(I + tau beta)^{-1}(x)` and its derivative in `x`.
    pub(crate) fn resolve(&self, tau: f64, x: f64) -> (f64, f64) {
        match &self.graph {
            ScalarGraph::Zero => (x, 1.0),
            ScalarGraph::Linear { slope } => (x / (1.0 + tau * slope), 1.0 / (1.0 + tau * slope)),
            ScalarGraph::Abs { weight } => {
                let thr = tau * weight;
                if x > thr {
                    (x - thr, 1.0)
                } else if x < -thr {
                    (x + thr, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            ScalarGraph::Indicator { lo, hi } => {
                if x < *lo {
                    (*lo, 0.0)
                } else if x > *hi {
                    (*hi, 0.0)
                } else {
                    (x, 1.0)
                }
            }
            ScalarGraph::Table(t) => t.resolvent(tau, x),
        }
    }

    /// Distance from `g` to the set `beta(y)`.
    pub fn graph_distance(&self, y: f64, g: f64) -> f64 {
        match &self.graph {
            ScalarGraph::Zero => g.abs(),
            ScalarGraph::Linear { slope } => (g - slope * y).abs(),
            ScalarGraph::Abs { weight } => {
                if y > 0.0 {
                    (g - weight).abs()
                } else if y < 0.0 {
                    (g + weight).abs()
                } else {
                    (g.abs() - weight).max(0.0)
                }
            }
            ScalarGraph::Indicator { lo, hi } => {
                if y < *lo || y > *hi {
                    f64::INFINITY
                } else {
                    let (gl, gh) = match (y == *lo, y == *hi) {
                        (true, true) => (f64::NEG_INFINITY, f64::INFINITY),
                        (true, false) => (f64::NEG_INFINITY, 0.0),
                        (false, true) => (0.0, f64::INFINITY),
                        (false, false) => (0.0, 0.0),
                    };
                    (gl - g).max(g - gh).max(0.0)
                }
            }
            ScalarGraph::Table(t) => (g - t.eval(y)).abs(),
        }
    }

    /// Least-modulus element of `beta(0)`.
    pub fn beta_at_zero(&self) -> f64 {
        match &self.graph {
            ScalarGraph::Table(t) => t.eval(0.0).abs(),
            _ => 0.0,
        }
    }

    /// `|d phi(0)|` in H: the norm of the least-norm element of the nodewise graph at 0.
    pub fn subdifferential_at_zero_norm(&self, space: &SpaceGrid) -> f64 {
        self.beta_at_zero() * space.total_volume().sqrt()
    }
}

/// Nodewise resolvent `(I + tau d phi)^{-1}`.
pub fn prox_phi(phi: &PhiSpec, tau: f64, x: &StateVector) -> Result<StateVector> {
    PhiSpec::check_tau(tau)?;
    Ok(x.map(|v| phi.resolve(tau, v).0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn apply_zero_is_zero() {
        let line = SpaceGrid::line(1.0, 5).unwrap();
        for op in [
            OperatorSpec::p_laplacian(2.0).unwrap(),
            OperatorSpec::p_laplacian(3.5).unwrap(),
            OperatorSpec::power(4.0).unwrap(),
            OperatorSpec::scalar_linear(2.0).unwrap(),
        ] {
            let out = op.apply(0.3, &StateVector::zeros(5), &line).unwrap();
            assert_eq!(out.max_abs(), 0.0);
        }
    }

    #[test]
    fn laplacian_stencil_example() {
        let line = SpaceGrid::line_with_width(0.25, 3).unwrap();
        let op = OperatorSpec::p_laplacian(2.0).unwrap();
        let out = op.apply(0.0, &sv(&[1.0, 1.0, 1.0]), &line).unwrap();
        assert_relative_eq!(out.as_slice()[0], 16.0, epsilon = 1e-12);
        assert_relative_eq!(out.as_slice()[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.as_slice()[2], 16.0, epsilon = 1e-12);
    }

    #[test]
    fn scalar_linear_example() {
        let op = OperatorSpec::scalar_linear(1.0).unwrap();
        let out = op.apply(0.0, &StateVector::scalar(2.0), &SpaceGrid::scalar()).unwrap();
        assert_eq!(out.as_slice(), &[2.0]);
    }

    #[test]
    fn p_laplacian_rejected_on_euclidean() {
        let op = OperatorSpec::p_laplacian(2.0).unwrap();
        assert!(op.apply(0.0, &StateVector::scalar(1.0), &SpaceGrid::scalar()).is_err());
    }

    #[test]
    fn bad_exponent_names_field() {
        match OperatorSpec::p_laplacian(1.5) {
            Err(Error::Parameter { name, .. }) => assert_eq!(name, "op.p"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coercivity_identity_exact() {
        let line = SpaceGrid::line(2.0, 7).unwrap();
        let op = OperatorSpec::p_laplacian(3.0).unwrap();
        let u = sv(&[0.1, -0.4, 0.9, 1.3, -0.2, 0.0, 0.7]);
        let au = op.apply(0.0, &u, &line).unwrap();
        let lhs = line.inner(au.as_slice(), u.as_slice());
        let rhs = x_norm(&u, &line, 3.0).unwrap().powf(3.0);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let plane = SpaceGrid::plane([1.0, 1.5], [3, 2]).unwrap();
        let op = OperatorSpec::new(
            OperatorKind::PLaplacianPlusLaplacian { p: 3.0 },
            DeclaredConstants::default(),
        )
        .unwrap();
        let u = sv(&[0.2, -0.5, 0.9, 0.4, 1.1, -0.3]);
        let jac = op.jacobian(0.0, &u, &plane);
        let h = 1e-6;
        for j in 0..6 {
            let mut up = u.clone();
            up.as_mut_slice()[j] += h;
            let mut dn = u.clone();
            dn.as_mut_slice()[j] -= h;
            let fd = &op.apply(0.0, &up, &plane).unwrap() - &op.apply(0.0, &dn, &plane).unwrap();
            for i in 0..6 {
                assert_relative_eq!(jac.get(i, j), fd.as_slice()[i] / (2.0 * h), epsilon = 1e-4, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn prox_examples() {
        let zero = PhiSpec::zero();
        assert_eq!(prox_phi(&zero, 0.7, &sv(&[1.5, -2.0])).unwrap(), sv(&[1.5, -2.0]));
        let lin = PhiSpec::new(ScalarGraph::Linear { slope: 1.0 }).unwrap();
        assert_eq!(prox_phi(&lin, 1.0, &StateVector::scalar(2.0)).unwrap().as_slice(), &[1.0]);
        let abs = PhiSpec::new(ScalarGraph::Abs { weight: 1.0 }).unwrap();
        assert_eq!(prox_phi(&abs, 0.5, &StateVector::scalar(2.0)).unwrap().as_slice(), &[1.5]);
        assert_eq!(prox_phi(&abs, 0.5, &StateVector::scalar(0.3)).unwrap().as_slice(), &[0.0]);
        assert!(prox_phi(&abs, 0.0, &StateVector::scalar(0.3)).is_err());
    }

    #[test]
    fn table_resolvent_solves_equation() {
        let tab = MonotoneTable::new(vec![(-1.0, -2.0), (0.0, 0.0), (0.5, 0.0), (1.0, 3.0)]).unwrap();
        let phi = PhiSpec::new(ScalarGraph::Table(tab.clone())).unwrap();
        for &x in &[-5.0, -1.2, -0.3, 0.0, 0.2, 0.6, 0.9, 4.0] {
            let (y, _) = phi.resolve(0.4, x);
            assert_relative_eq!(y + 0.4 * tab.eval(y), x, epsilon = 1e-12);
        }
    }

    #[test]
    fn regularize_examples() {
        let op = OperatorSpec::scalar_linear(1.0).unwrap();
        let same = regularize(&op, 0.0).unwrap();
        assert_eq!(same, op);
        let r = regularize(&op, 0.5).unwrap();
        let out = r.apply(0.0, &StateVector::scalar(2.0), &SpaceGrid::scalar()).unwrap();
        assert_eq!(out.as_slice(), &[3.0]);
        assert_eq!(r.declared.strong_monotonicity, 1.5);
        assert!(regularize(&op, -1.0).is_err());
    }

    #[test]
    fn check_monotone_examples() {
        let s = SpaceGrid::scalar();
        let op = OperatorSpec::scalar_linear(1.0).unwrap();
        let samples = vec![
            (StateVector::scalar(1.0), StateVector::scalar(-2.0)),
            (StateVector::scalar(0.5), StateVector::scalar(0.5)),
        ];
        let rep = check_monotone(&op, 0.0, &samples, &s).unwrap();
        assert_relative_eq!(rep.min_monotonicity_ratio.unwrap(), 1.0);
        assert_eq!(rep.pairs_skipped, 1);
        assert!(!rep.strong_monotonicity_violated);
        assert!(check_monotone(&op, 0.0, &[], &s).is_err());
    }

    #[test]
    fn laplacian_ratio_bounded_by_first_eigenvalue() {
        let line = SpaceGrid::line(1.0, 9).unwrap();
        let op = OperatorSpec::p_laplacian(2.0).unwrap();
        let lambda = laplacian_first_eigenvalue(&line);
        // Eigenvalue of the tridiagonal stencil, computed independently.
        let h: f64 = 0.1;
        assert_relative_eq!(lambda, (2.0 - 2.0 * (std::f64::consts::PI * h).cos()) / (h * h), max_relative = 1e-12);
        let samples: Vec<_> = (0..20)
            .map(|k| {
                let u = StateVector::new((0..9).map(|i| ((i * k) as f64 * 0.7).sin()).collect()).unwrap();
                let v = StateVector::new((0..9).map(|i| ((i + k) as f64 * 1.3).cos()).collect()).unwrap();
                (u, v)
            })
            .collect();
        let rep = check_monotone(&op, 0.0, &samples, &line).unwrap();
        assert!(rep.min_monotonicity_ratio.unwrap() >= lambda * (1.0 - 1e-12));
    }

    fn arb_graph() -> impl Strategy<Value = ScalarGraph> {
        prop_oneof![
            Just(ScalarGraph::Zero),
            (0.0..5.0f64).prop_map(|slope| ScalarGraph::Linear { slope }),
            (0.0..3.0f64).prop_map(|weight| ScalarGraph::Abs { weight }),
            (-3.0..0.0f64, 0.0..3.0f64).prop_map(|(lo, hi)| ScalarGraph::Indicator { lo, hi }),
            Just(ScalarGraph::Table(
                MonotoneTable::new(vec![(-1.0, -4.0), (0.0, 0.5), (2.0, 0.5), (3.0, 6.0)]).unwrap()
            )),
        ]
    }

    proptest! {
        #[test]
        fn prox_is_nonexpansive(graph in arb_graph(), tau in 0.01..3.0f64,
                                x in prop::collection::vec(-10.0..10.0f64, 4),
                                y in prop::collection::vec(-10.0..10.0f64, 4)) {
            let phi = PhiSpec::new(graph).unwrap();
            let s = SpaceGrid::euclidean(4).unwrap();
            let px = prox_phi(&phi, tau, &sv(&x)).unwrap();
            let py = prox_phi(&phi, tau, &sv(&y)).unwrap();
            prop_assert!(s.distance(px.as_slice(), py.as_slice()) <= s.distance(&x, &y) + 1e-12);
        }

        #[test]
        fn prox_satisfies_resolvent_identity(graph in arb_graph(), tau in 0.01..3.0f64, x in -10.0..10.0f64) {
            let phi = PhiSpec::new(graph).unwrap();
            let (y, _) = phi.resolve(tau, x);
            prop_assert!(phi.graph_distance(y, (x - y) / tau) <= 1e-9 * (1.0 + x.abs() / tau));
        }

        #[test]
        fn sign_graph_slope_bounded(tau in 0.01..3.0f64, x in -10.0..10.0f64) {
            let phi = PhiSpec::new(ScalarGraph::Abs { weight: 1.0 }).unwrap();
            let (y, _) = phi.resolve(tau, x);
            let g = (x - y) / tau;
            prop_assert!(g.abs() <= 1.0 + 1e-12);
            if y != 0.0 {
                prop_assert!((g.abs() - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn p_laplacian_is_monotone(p in 2.0..5.0f64,
                                   u in prop::collection::vec(-3.0..3.0f64, 6),
                                   v in prop::collection::vec(-3.0..3.0f64, 6)) {
            let line = SpaceGrid::line(1.0, 6).unwrap();
            let op = OperatorSpec::p_laplacian(p).unwrap();
            let (u, v) = (sv(&u), sv(&v));
            let diff = &u - &v;
            let da = &op.apply(0.0, &u, &line).unwrap() - &op.apply(0.0, &v, &line).unwrap();
            prop_assert!(line.inner(da.as_slice(), diff.as_slice()) >= -1e-9);
        }

        #[test]
        fn regularized_is_strongly_monotone(p in 2.0..5.0f64, eps in 0.001..2.0f64,
                                            u in prop::collection::vec(-3.0..3.0f64, 5),
                                            v in prop::collection::vec(-3.0..3.0f64, 5)) {
            let line = SpaceGrid::line(1.0, 5).unwrap();
            let op = regularize(&OperatorSpec::p_laplacian(p).unwrap(), eps).unwrap();
            let (u, v) = (sv(&u), sv(&v));
            let diff = &u - &v;
            let da = &op.apply(0.0, &u, &line).unwrap() - &op.apply(0.0, &v, &line).unwrap();
            let lhs = line.inner(da.as_slice(), diff.as_slice());
            let rhs = eps * line.inner(diff.as_slice(), diff.as_slice());
            prop_assert!(lhs >= rhs - 1e-9 * (1.0 + rhs));
        }
    }
}
