//! Scenario files, the built-in catalog, workflow orchestration and artifacts.

mod catalog;
mod config;
mod oracle;
mod run;

use std::path::PathBuf;

use serde::Serialize;

use crate::cauchy::Evolution;
use crate::grid::{ForcingPath, SpaceGrid, StateVector, TimeGrid};
use crate::periodic::PeriodicOptions;
use crate::set_valued::{MultimapSpec, Selection};
use crate::Result;

pub use catalog::{build_parabolic_scenario, builtin, builtin_names, ParabolicParams};
pub use config::{load_scenario, parse_scenario};
pub use oracle::{oracle, oracle_names, stationary_heat};
pub use run::{diagnose, execute, run, Check, CheckStatus, Diagnostics, Outcome, RunArtifacts, RunStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Workflow {
    Cauchy,
    PeriodicFixedH,
    Convex,
    Nonconvex,
    Extremal,
    Relaxation,
    RegularizedPath,
}

impl Workflow {
    pub const ALL: [Workflow; 7] = [
        Workflow::Cauchy,
        Workflow::PeriodicFixedH,
        Workflow::Convex,
        Workflow::Nonconvex,
        Workflow::Extremal,
        Workflow::Relaxation,
        Workflow::RegularizedPath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Workflow::Cauchy => "cauchy",
            Workflow::PeriodicFixedH => "periodic_fixed_h",
            Workflow::Convex => "convex",
            Workflow::Nonconvex => "nonconvex",
            Workflow::Extremal => "extremal",
            Workflow::Relaxation => "relaxation",
            Workflow::RegularizedPath => "regularized_path",
        }
    }

    pub fn parse(s: &str) -> Option<Workflow> {
        Workflow::ALL.into_iter().find(|w| w.name() == s)
    }
}

/// Fixed forcing `h(t)` for the single-valued workflows, the same on every node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    Zero,
    Constant { value: f64 },
    /// `amplitude * cos(frequency * t)`
    Cosine { amplitude: f64, frequency: f64 },
    /// `amplitude * sin(frequency * t)`
    Sine { amplitude: f64, frequency: f64 },
}

impl ForcingSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::Constant { value } => value,
            ForcingSpec::Cosine { amplitude, frequency } => amplitude * (frequency * t).cos(),
            ForcingSpec::Sine { amplitude, frequency } => amplitude * (frequency * t).sin(),
        }
    }

    pub fn path(&self, grid: TimeGrid, space: SpaceGrid) -> Result<ForcingPath> {
        ForcingPath::from_fn(grid, space, |t| StateVector::constant(space.len(), self.eval(t)))
    }
}

/// Which forcing loop each stage of a regularization path runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathStage {
    Convex,
    Extremal,
}

/// A fully validated run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub workflow: Workflow,
    /// Seed for the sampled hypothesis diagnostics.
    pub seed: u64,
    pub grid: TimeGrid,
    pub evolution: Evolution,
    pub multimap: MultimapSpec,
    pub forcing: ForcingSpec,
    pub x0: StateVector,
    pub selection: Selection,
    pub periodic: PeriodicOptions,
    pub theta: f64,
    pub forcing_tol: f64,
    pub forcing_max: usize,
    /// Chattering window for the extremal workflow.
    pub delta: Option<f64>,
    /// Window schedule for the relaxation workflow.
    pub deltas: Vec<f64>,
    pub relax_eps: Option<f64>,
    pub eps_schedule: Vec<f64>,
    pub path_stage: PathStage,
    pub samples: usize,
    pub sample_scale: f64,
    pub output_dir: Option<PathBuf>,
    /// `key = value` lines for every default that was filled in.
    pub defaults: Vec<String>,
}

impl Scenario {
    /// Default settings around the given problem data.
    pub fn new(name: impl Into<String>, workflow: Workflow, grid: TimeGrid, evolution: Evolution, multimap: MultimapSpec) -> Self {
        let n = evolution.space.len();
        Scenario {
            name: name.into(),
            workflow,
            seed: 0,
            grid,
            evolution,
            multimap,
            forcing: ForcingSpec::Zero,
            x0: StateVector::zeros(n),
            selection: Selection::MinimalNorm,
            periodic: PeriodicOptions::default(),
            theta: 0.5,
            forcing_tol: 1e-8,
            forcing_max: 100,
            delta: None,
            deltas: Vec::new(),
            relax_eps: None,
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4],
            path_stage: PathStage::Convex,
            samples: 64,
            sample_scale: 2.0,
            output_dir: None,
            defaults: Vec::new(),
        }
    }
}
