//! The multivalued perturbation `F(t, x) = f(t, x) + k(t) K`, its radial
//! truncation, and the selection strategies used by the fixed-point loops.
//!
//! Controls act channelwise: node `i` receives `f_i(t, x) + k_i(t) v_i` with
//! `v_i` in the scalar control set `K`. For box and interval shapes the set
//! `F(t, x)` is a translated box in H and every distance or projection is
//! computed channelwise.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{hausdorff_finite, ForcingPath, SpaceGrid, StateVector, TimeGrid, Trajectory};

/// Catalog of drifts `f0(t, z, x)` acting nodewise on the state value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    Zero,
    /// `c`
    Constant { value: f64 },
    /// `slope * x`
    Linear { slope: f64 },
    /// `amplitude * sin(x)`
    Sine { amplitude: f64 },
    /// `amplitude * cos(frequency * t)`
    Cosine { amplitude: f64, frequency: f64 },
    /// `k0 * min(1 + |x|, cap)`
    SaturatedGrowth { k0: f64, cap: f64 },
}

impl Drift {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match *self {
            Drift::Zero => 0.0,
            Drift::Constant { value } => value,
            Drift::Linear { slope } => slope * x,
            Drift::Sine { amplitude } => amplitude * x.sin(),
            Drift::Cosine { amplitude, frequency } => amplitude * (frequency * t).cos(),
            Drift::SaturatedGrowth { k0, cap } => k0 * (1.0 + x.abs()).min(cap),
        }
    }

    /// Lipschitz modulus in `x` (nodewise, hence also in H).
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Drift::Linear { slope } => slope.abs(),
            Drift::Sine { amplitude } => amplitude.abs(),
            Drift::SaturatedGrowth { k0, .. } => k0.abs(),
            _ => 0.0,
        }
    }

    /// `(a, c)` with `|f0(t, z, x)| <= a + c |x|` nodewise.
    fn affine_bound(&self) -> (f64, f64) {
        match *self {
            Drift::Zero => (0.0, 0.0),
            Drift::Constant { value } => (value.abs(), 0.0),
            Drift::Linear { slope } => (0.0, slope.abs()),
            Drift::Sine { amplitude } => (0.0, amplitude.abs()),
            Drift::Cosine { amplitude, .. } => (amplitude.abs(), 0.0),
            Drift::SaturatedGrowth { k0, cap } => {
                let k = k0.abs();
                if cap >= 1.0 {
                    (k, k)
                } else {
                    (k * cap.max(0.0), 0.0)
                }
            }
        }
    }

    pub fn depends_on_state(&self) -> bool {
        self.lipschitz() > 0.0
    }

    /// `-f0`
    pub fn negated(&self) -> Drift {
        match *self {
            Drift::Zero => Drift::Zero,
            Drift::Constant { value } => Drift::Constant { value: -value },
            Drift::Linear { slope } => Drift::Linear { slope: -slope },
            Drift::Sine { amplitude } => Drift::Sine { amplitude: -amplitude },
            Drift::Cosine { amplitude, frequency } => Drift::Cosine {
                amplitude: -amplitude,
                frequency,
            },
            Drift::SaturatedGrowth { k0, cap } => Drift::SaturatedGrowth { k0: -k0, cap },
        }
    }
}

/// Control gain `k(t, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GainField {
    Uniform { value: f64 },
    /// `peak * prod_a sin(pi z_a / L_a)`, vanishing on the boundary.
    Bump { peak: f64 },
}

impl GainField {
    fn at(&self, space: &SpaceGrid, i: usize) -> f64 {
        match *self {
            GainField::Uniform { value } => value,
            GainField::Bump { peak } => {
                let z = space.coordinates(i);
                let pi = std::f64::consts::PI;
                match *space {
                    SpaceGrid::Euclidean { .. } => peak,
                    SpaceGrid::Line { extent, .. } => peak * (pi * z[0] / extent).sin(),
                    SpaceGrid::Plane { extent, .. } => {
                        peak * (pi * z[0] / extent[0]).sin() * (pi * z[1] / extent[1]).sin()
                    }
                }
            }
        }
    }

    fn max_abs(&self) -> f64 {
        match *self {
            GainField::Uniform { value } => value.abs(),
            GainField::Bump { peak } => peak.abs(),
        }
    }
}

/// Scalar control set `K` applied on every channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlShape {
    /// `[-radius, radius]` per channel; its vertices are the sign patterns.
    Box { radius: f64 },
    Interval { lo: f64, hi: f64 },
    /// Finite (nonconvex) set of scalar control values.
    Finite { points: Vec<f64> },
}

impl ControlShape {
    fn validate(&self) -> Result<()> {
        match self {
            ControlShape::Box { radius } if !(*radius >= 0.0) => {
                Err(Error::config("multimap.control.radius", "must be nonnegative"))
            }
            ControlShape::Interval { lo, hi } if !(lo <= hi) => {
                Err(Error::config("multimap.control.interval", "need lo <= hi"))
            }
            ControlShape::Finite { points } if points.is_empty() => {
                Err(Error::config("multimap.control.points", "finite control set is empty"))
            }
            ControlShape::Finite { points } if points.iter().any(|p| !p.is_finite()) => {
                Err(Error::config("multimap.control.points", "points must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Endpoints of the convex hull.
    pub fn hull(&self) -> (f64, f64) {
        match self {
            ControlShape::Box { radius } => (-radius, *radius),
            ControlShape::Interval { lo, hi } => (*lo, *hi),
            ControlShape::Finite { points } => points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(p), b.max(p))),
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, ControlShape::Finite { .. })
    }
}

/// `F(t, x) = { f(t, x) + k(t) v : v in K }`, optionally truncated by the
/// radial retraction onto the ball of radius `truncation`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimapSpec {
    pub drift: Drift,
    pub control: ControlShape,
    pub gain: GainField,
    /// Declared Hartman radius `M`.
    pub hartman_radius: Option<f64>,
    /// Declared Lipschitz modulus `l` of `x -> F(t, x)` in the Hausdorff metric.
    pub declared_lipschitz: Option<f64>,
    pub truncation: Option<f64>,
}

/// The image `k_i K` at one node, as offsets from the drift value.
#[derive(Debug, Clone)]
enum NodeSet {
    Segment(f64, f64),
    Points(Vec<f64>),
}

impl NodeSet {
    fn project(&self, v: f64) -> f64 {
        match self {
            NodeSet::Segment(a, b) => v.clamp(*a, *b),
            NodeSet::Points(pts) => nearest(pts, v),
        }
    }

    fn distance(&self, v: f64) -> f64 {
        (v - self.project(v)).abs()
    }

    fn vertices(&self) -> (f64, f64) {
        match self {
            NodeSet::Segment(a, b) => (*a, *b),
            NodeSet::Points(pts) => pts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(p), b.max(p))),
        }
    }

    fn midpoint(&self) -> f64 {
        let (a, b) = self.vertices();
        0.5 * (a + b)
    }
}

fn nearest(pts: &[f64], v: f64) -> f64 {
    let mut best = pts[0];
    for &p in &pts[1..] {
        if (p - v).abs() < (best - v).abs() {
            best = p;
        }
    }
    best
}

impl MultimapSpec {
    pub fn new(drift: Drift, control: ControlShape, gain: GainField) -> Result<Self> {
        control.validate()?;
        Ok(Self {
            drift,
            control,
            gain,
            hartman_radius: None,
            declared_lipschitz: None,
            truncation: None,
        })
    }

    /// The single-valued map `x -> f(t, x)`.
    pub fn single_valued(drift: Drift) -> Self {
        Self {
            drift,
            control: ControlShape::Box { radius: 0.0 },
            gain: GainField::Uniform { value: 0.0 },
            hartman_radius: None,
            declared_lipschitz: None,
            truncation: None,
        }
    }

    /// `f0 = 0` with the interval control `[lo, hi]` and unit gain.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(Drift::Zero, ControlShape::Interval { lo, hi }, GainField::Uniform { value: 1.0 })
    }

    pub fn with_hartman_radius(mut self, m: f64) -> Self {
        self.hartman_radius = Some(m);
        self
    }

    /// Lipschitz modulus used by relaxation estimates: the declared value
    /// if present, otherwise the drift's own modulus.
    pub fn lipschitz(&self) -> f64 {
        self.declared_lipschitz.unwrap_or_else(|| self.drift.lipschitz())
    }

    /// The control part does not depend on `x`.
    pub fn is_state_independent(&self) -> bool {
        !self.drift.depends_on_state()
    }

    fn effective_state(&self, x: &StateVector, space: &SpaceGrid) -> StateVector {
        match self.truncation {
            Some(m) => retract(x, m, space),
            None => x.clone(),
        }
    }

    /// `f(t, x)` after truncation.
    pub fn drift_values(&self, t: f64, x: &StateVector, space: &SpaceGrid) -> Result<StateVector> {
        space.check(x)?;
        let xe = self.effective_state(x, space);
        StateVector::new(xe.as_slice().iter().map(|&v| self.drift.eval(t, v)).collect())
    }

    fn node_sets(&self, space: &SpaceGrid) -> Vec<NodeSet> {
        (0..space.len())
            .map(|i| {
                let k = self.gain.at(space, i);
                match &self.control {
                    ControlShape::Finite { points } => NodeSet::Points(points.iter().map(|p| k * p).collect()),
                    other => {
                        let (lo, hi) = other.hull();
                        NodeSet::Segment((k * lo).min(k * hi), (k * lo).max(k * hi))
                    }
                }
            })
            .collect()
    }

    /// Lowest and highest offset `k_i K` at each node; the vertices of
    /// `F(t, x)` at node `i` are `f(t, x_i)` plus these.
    pub fn vertex_offsets(&self, space: &SpaceGrid) -> Vec<(f64, f64)> {
        self.node_sets(space).iter().map(NodeSet::vertices).collect()
    }

    /// Gain values at the nodes.
    pub fn gains(&self, space: &SpaceGrid) -> Vec<f64> {
        (0..space.len()).map(|i| self.gain.at(space, i)).collect()
    }

    /// `sup { |y| : y in F(t, x) }`
    pub fn set_norm(&self, t: f64, x: &StateVector, space: &SpaceGrid) -> Result<f64> {
        let f = self.drift_values(t, x, space)?;
        let sets = self.node_sets(space);
        let sq: Vec<f64> = f
            .as_slice()
            .iter()
            .zip(&sets)
            .map(|(fi, s)| {
                let (a, b) = s.vertices();
                (fi + a).abs().max((fi + b).abs())
            })
            .collect();
        Ok(space.norm_of(&sq))
    }

    /// Constant `k` with `|F(t, x)| <= k (1 + |x|)` for all `t, x`.
    pub fn growth_constant(&self, space: &SpaceGrid) -> f64 {
        let (a, c) = self.drift.affine_bound();
        let (lo, hi) = self.control.hull();
        let control = self.gain.max_abs() * lo.abs().max(hi.abs());
        // |f(x)|_H <= a sqrt(V) + c |x|_H since the drift acts nodewise.
        ((a + control) * space.total_volume().sqrt()).max(c)
    }

    /// Uniform bound on `|F(t, x)|` over the truncation ball (or over all
    /// `x` when the drift is bounded).
    pub fn truncated_bound(&self, space: &SpaceGrid) -> Option<f64> {
        let (a, c) = self.drift.affine_bound();
        let (lo, hi) = self.control.hull();
        let control = self.gain.max_abs() * lo.abs().max(hi.abs());
        let base = (a + control) * space.total_volume().sqrt();
        if c == 0.0 {
            Some(base)
        } else {
            self.truncation.map(|m| base + c * m)
        }
    }
}

/// `p_M(x)`: `x` if `|x| <= M`, else `M x / |x|`.
pub fn radial_retraction(x: &StateVector, m: f64, space: &SpaceGrid) -> Result<StateVector> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::param("M", format!("radius must be positive, got {m}")));
    }
    space.check(x)?;
    Ok(retract(x, m, space))
}

fn retract(x: &StateVector, m: f64, space: &SpaceGrid) -> StateVector {
    let n = space.norm_of(x.as_slice());
    if n <= m {
        x.clone()
    } else {
        x * (m / n)
    }
}

/// `F^(t, x) = F(t, p_M(x))`.
pub fn truncate_multimap(f: &MultimapSpec, m: f64) -> Result<MultimapSpec> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::param("M", format!("radius must be positive, got {m}")));
    }
    let mut out = f.clone();
    out.truncation = Some(m);
    Ok(out)
}

/// Which endpoint an extremal selection uses at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexSchedule {
    Upper,
    Lower,
    /// Upper on even windows `[2j P, (2j+1) P)`, lower on odd ones.
    Alternate { period: f64 },
}

impl VertexSchedule {
    fn upper_at(&self, t: f64) -> bool {
        match *self {
            VertexSchedule::Upper => true,
            VertexSchedule::Lower => false,
            VertexSchedule::Alternate { period } => {
                let w = (t / period * (1.0 - 1e-12)).floor() as i64;
                w.rem_euclid(2) == 0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    /// Least-norm element of `F(t, u)`.
    MinimalNorm,
    /// `f(t, u) + k * midpoint(K)`; the nearest listed point for finite sets.
    Centroid,
    /// A vertex of `F(t, u)`.
    ExtremalVertex(VertexSchedule),
    /// Element of `F(t, u)` within `dist(target(t), F(t, u)) + tolerance` of the target.
    NearTarget { target: ForcingPath, tolerance: f64 },
}

impl Selection {
    /// Near-target selection with slack `eps / (2 M b)`.
    pub fn near_target(target: ForcingPath, eps: f64, m: f64, b: f64) -> Result<Self> {
        if !(eps > 0.0 && m > 0.0) {
            return Err(Error::param("eps", "near-target selection needs eps > 0 and M > 0"));
        }
        Ok(Selection::NearTarget {
            target,
            tolerance: eps / (2.0 * m * b),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Selection::MinimalNorm => "minimal_norm",
            Selection::Centroid => "centroid",
            Selection::ExtremalVertex(VertexSchedule::Upper) => "extremal_upper",
            Selection::ExtremalVertex(VertexSchedule::Lower) => "extremal_lower",
            Selection::ExtremalVertex(VertexSchedule::Alternate { .. }) => "extremal_alternate",
            Selection::NearTarget { .. } => "near_target",
        }
    }
}

/// Picks an element of `F(t, u)` according to `sel`.
pub fn select(
    f: &MultimapSpec,
    sel: &Selection,
    t: f64,
    u: &StateVector,
    space: &SpaceGrid,
) -> Result<StateVector> {
    f.control.validate()?;
    let drift = f.drift_values(t, u, space)?;
    let sets = f.node_sets(space);
    let target = match sel {
        Selection::NearTarget { target, .. } => {
            space.check(target.value(0))?;
            Some(target.at_time(t))
        }
        _ => None,
    };
    let out = drift
        .as_slice()
        .iter()
        .zip(&sets)
        .enumerate()
        .map(|(i, (&fi, set))| {
            let offset = match sel {
                Selection::MinimalNorm => set.project(-fi),
                Selection::Centroid => set.project(set.midpoint()),
                Selection::ExtremalVertex(schedule) => {
                    let (a, b) = set.vertices();
                    if schedule.upper_at(t) {
                        b
                    } else {
                        a
                    }
                }
                Selection::NearTarget { .. } => {
                    let h = target.map_or(0.0, |h| h.as_slice()[i]);
                    set.project(h - fi)
                }
            };
            fi + offset
        })
        .collect();
    StateVector::new(out)
}

/// Selection evaluated along a trajectory: `values[k] = select(t_{k+1}, u_{k+1})`.
pub fn select_path(f: &MultimapSpec, sel: &Selection, u: &Trajectory) -> Result<ForcingPath> {
    let grid = *u.grid();
    let values = (0..grid.n_steps())
        .map(|k| select(f, sel, grid.time(k + 1), u.state(k + 1), u.space()))
        .collect::<Result<Vec<_>>>()?;
    ForcingPath::new(grid, *u.space(), values)
}

/// Largest channelwise distance from `y - f(t, u)` to `k K`.
pub fn membership_defect(
    f: &MultimapSpec,
    t: f64,
    u: &StateVector,
    y: &StateVector,
    space: &SpaceGrid,
) -> Result<f64> {
    space.check(y)?;
    let drift = f.drift_values(t, u, space)?;
    Ok(drift
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .zip(f.node_sets(space))
        .map(|((fi, yi), set)| set.distance(yi - fi))
        .fold(0.0, f64::max))
}

/// `y in F(t, u)` up to `tol` on every channel.
pub fn membership(
    f: &MultimapSpec,
    t: f64,
    u: &StateVector,
    y: &StateVector,
    tol: f64,
    space: &SpaceGrid,
) -> Result<bool> {
    Ok(membership_defect(f, t, u, y, space)? <= tol)
}

/// Largest channelwise distance from `y - f(t, u)` to the endpoints of `k K`.
pub fn extremal_deviation(
    f: &MultimapSpec,
    t: f64,
    u: &StateVector,
    y: &StateVector,
    space: &SpaceGrid,
) -> Result<f64> {
    space.check(y)?;
    let drift = f.drift_values(t, u, space)?;
    Ok(drift
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .zip(f.node_sets(space))
        .map(|((fi, yi), set)| {
            let (a, b) = set.vertices();
            let v = yi - fi;
            (v - a).abs().min((v - b).abs())
        })
        .fold(0.0, f64::max))
}

/// Worst-case membership defect of a forcing along a trajectory.
pub fn path_membership_defect(f: &MultimapSpec, h: &ForcingPath, u: &Trajectory) -> Result<f64> {
    let grid = u.grid();
    let mut worst: f64 = 0.0;
    for k in 0..grid.n_steps() {
        worst = worst.max(membership_defect(f, grid.time(k + 1), u.state(k + 1), h.value(k), u.space())?);
    }
    Ok(worst)
}

/// Worst-case extremality deviation of a forcing along a trajectory.
pub fn path_extremal_deviation(f: &MultimapSpec, h: &ForcingPath, u: &Trajectory) -> Result<f64> {
    let grid = u.grid();
    let mut worst: f64 = 0.0;
    for k in 0..grid.n_steps() {
        worst = worst.max(extremal_deviation(f, grid.time(k + 1), u.state(k + 1), h.value(k), u.space())?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct HartmanReport {
    pub radius: f64,
    /// `min (h, x)` over samples with `|x| = M` and vertices `h` of `F(t, x)`.
    pub min_inner: f64,
    pub samples_used: usize,
    pub passes: bool,
}

/// Samples the Hartman sign condition `0 <= (h, x)` on the sphere `|x| = M`.
/// Sample points are rescaled onto the sphere; zero samples are skipped.
pub fn hartman_check(
    f: &MultimapSpec,
    m: f64,
    samples: &[(f64, StateVector)],
    space: &SpaceGrid,
) -> Result<HartmanReport> {
    if !(m > 0.0) {
        return Err(Error::param("M", "radius must be positive"));
    }
    let sets = f.node_sets(space);
    let mut min_inner = f64::INFINITY;
    let mut used = 0;
    for (t, x) in samples {
        space.check(x)?;
        let n = space.norm_of(x.as_slice());
        if n == 0.0 {
            continue;
        }
        let x = x * (m / n);
        let drift = f.drift_values(*t, &x, space)?;
        // The minimum of a linear form over a box is attained channelwise at a vertex.
        let per_node: Vec<f64> = x
            .as_slice()
            .iter()
            .zip(drift.as_slice())
            .zip(&sets)
            .map(|((xi, fi), set)| {
                let (a, b) = set.vertices();
                fi * xi + (a * xi).min(b * xi)
            })
            .collect();
        let inner = per_node.iter().sum::<f64>() * space.weight();
        min_inner = min_inner.min(inner);
        used += 1;
    }
    if used == 0 {
        min_inner = 0.0;
    }
    Ok(HartmanReport {
        radius: m,
        min_inner,
        samples_used: used,
        passes: min_inner >= -1e-12 * (1.0 + m * m),
    })
}

/// Hausdorff distance between `F(t, x)` and `F(t, y)` computed on vertex
/// images (exhaustive for up to 10 channels) in H coordinates.
pub fn hausdorff_between(
    f: &MultimapSpec,
    t: f64,
    x: &StateVector,
    y: &StateVector,
    space: &SpaceGrid,
) -> Result<f64> {
    let n = space.len();
    let w = space.weight().sqrt();
    let fx = f.drift_values(t, x, space)?;
    let fy = f.drift_values(t, y, space)?;
    let sets = f.node_sets(space);
    if n > 10 {
        // Both sets are translates of the same product set.
        return Ok(space.distance(fx.as_slice(), fy.as_slice()));
    }
    let choices: Vec<Vec<f64>> = sets
        .iter()
        .map(|s| match s {
            NodeSet::Segment(a, b) if a == b => vec![*a],
            NodeSet::Segment(a, b) => vec![*a, *b],
            NodeSet::Points(p) => p.clone(),
        })
        .collect();
    let images = |base: &StateVector| -> Vec<Vec<f64>> {
        let mut out = vec![Vec::with_capacity(n)];
        for (i, opts) in choices.iter().enumerate() {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    opts.iter().map(move |o| {
                        let mut p = prefix.clone();
                        p.push(w * (base.as_slice()[i] + o));
                        p
                    })
                })
                .collect();
        }
        out
    };
    hausdorff_finite(&images(&fx), &images(&fy))
}

/// Random states with H-norm up to `scale`, for sampled diagnostics.
pub fn sample_states<R: Rng>(rng: &mut R, space: &SpaceGrid, count: usize, scale: f64) -> Vec<StateVector> {
    (0..count)
        .map(|_| {
            let raw: Vec<f64> = (0..space.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = space.norm_of(&raw).max(1e-300);
            let r = scale * rng.random_range(0.0..1.0f64);
            StateVector::from_vec_unchecked(raw.iter().map(|v| v * r / n).collect())
        })
        .collect()
}

/// `sup_t sup_x |F^(t, x)|` sampled along a time grid, used for chattering certificates.
pub fn sampled_bound(f: &MultimapSpec, grid: &TimeGrid, states: &[&Trajectory]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for u in states {
        for k in 0..grid.n_steps() {
            best = best.max(f.set_norm(grid.time(k + 1), u.state(k + 1), u.space())?);
        }
    }
    Ok(best)
}
