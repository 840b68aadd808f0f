//! Workflow dispatch, hypothesis diagnostics and artifact output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{PathStage, Scenario, Workflow};
use crate::cauchy::{CauchyStats, Evolution};
use crate::error::{Error, Result};
use crate::grid::{ForcingPath, StateVector, Trajectory};
use crate::monotone::{check_monotone, regularize};
use crate::periodic::{
    existence_multimap, find_periodic, solve_convex, solve_extremal, solve_regularized_path, ForcingLoop,
    ForcingOptions, PeriodicReport,
};
use crate::relaxation::{relax_approximate, relaxation_csv, relaxation_rows, RelaxOptions, RelaxationRow, RelaxationRun};
use crate::set_valued::{hartman_check, hausdorff_between, sample_states, MultimapSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Unverified,
}

/// One sampled or structural check of a declared hypothesis.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub hypothesis: &'static str,
    pub status: CheckStatus,
    /// Whether the chosen workflow relies on this hypothesis.
    pub required: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub scenario: String,
    pub workflow: Workflow,
    pub seed: u64,
    /// `verified`, or `hypothesis-unverified` when a required check fails or cannot be run.
    pub status: &'static str,
    pub checks: Vec<Check>,
    pub defaults: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchySummary {
    #[serde(flatten)]
    pub stats: CauchyStats,
    pub inclusion_defect: f64,
}

/// Result of one workflow, before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub trajectory: Trajectory,
    pub forcing: ForcingPath,
    pub cauchy: Option<CauchySummary>,
    pub periodic: Option<PeriodicReport>,
    pub relaxation: Option<RelaxationRun>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    Failed { kind: &'static str, message: String },
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::Failed { .. } => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub status: RunStatus,
    pub diagnostics: Diagnostics,
}

fn forcing_options(scn: &Scenario) -> ForcingOptions {
    ForcingOptions {
        periodic: scn.periodic,
        theta: scn.theta,
        tol: scn.forcing_tol,
        max_iter: scn.forcing_max,
        x_init: Some(scn.x0.clone()),
        h_init: None,
    }
}

/// The multimap handed to the existence loops. Without a positive declared
/// constant the truncation radius is taken from the smallest regularization,
/// which gives the largest radius along the path.
fn loop_multimap(scn: &Scenario) -> Result<MultimapSpec> {
    let evo = &scn.evolution;
    if evo.op.declared.strong_monotonicity > 0.0 {
        return existence_multimap(evo, &scn.grid, &scn.multimap);
    }
    let eps = scn.eps_schedule.last().copied().unwrap_or(1e-6);
    let reg = Evolution {
        op: regularize(&evo.op, eps)?,
        ..evo.clone()
    };
    existence_multimap(&reg, &scn.grid, &scn.multimap)
}

fn require_delta(scn: &Scenario) -> Result<f64> {
    scn.delta
        .ok_or_else(|| Error::config("relaxation.delta", "required by the extremal loop"))
}

/// Runs the scenario's workflow.
pub fn execute(scn: &Scenario) -> Result<Outcome> {
    let evo = &scn.evolution;
    let grid = &scn.grid;
    let opts = forcing_options(scn);
    let from_solution = |sol: crate::periodic::PeriodicSolution| Outcome {
        trajectory: sol.trajectory,
        forcing: sol.forcing,
        cauchy: None,
        periodic: Some(sol.report),
        relaxation: None,
    };
    match scn.workflow {
        Workflow::Cauchy => {
            let h = scn.forcing.path(*grid, evo.space)?;
            let (traj, stats) = evo.solve_cauchy_with_stats(grid, &scn.x0, &h)?;
            let inclusion_defect = evo.inclusion_defect(&traj, &h)?;
            Ok(Outcome {
                trajectory: traj,
                forcing: h,
                cauchy: Some(CauchySummary { stats, inclusion_defect }),
                periodic: None,
                relaxation: None,
            })
        }
        Workflow::PeriodicFixedH => {
            let h = scn.forcing.path(*grid, evo.space)?;
            let (traj, report) = find_periodic(evo, grid, &h, &scn.x0, &scn.periodic)?;
            Ok(Outcome {
                trajectory: traj,
                forcing: h,
                cauchy: None,
                periodic: Some(report),
                relaxation: None,
            })
        }
        Workflow::Convex | Workflow::Nonconvex => {
            let f = loop_multimap(scn)?;
            Ok(from_solution(solve_convex(evo, grid, &f, &scn.selection, &opts)?))
        }
        Workflow::Extremal => {
            let f = loop_multimap(scn)?;
            Ok(from_solution(solve_extremal(evo, grid, &f, require_delta(scn)?, &opts)?))
        }
        Workflow::Relaxation => {
            let f = loop_multimap(scn)?;
            let sol = solve_convex(evo, grid, &f, &scn.selection, &opts)?;
            let run = relax_approximate(
                evo,
                &f,
                &sol.trajectory,
                &sol.forcing,
                &scn.deltas,
                &RelaxOptions { eps: scn.relax_eps },
            )?;
            Ok(Outcome {
                relaxation: Some(run),
                ..from_solution(sol)
            })
        }
        Workflow::RegularizedPath => {
            let f = loop_multimap(scn)?;
            let stage = match scn.path_stage {
                PathStage::Convex => ForcingLoop::Convex(scn.selection.clone()),
                PathStage::Extremal => ForcingLoop::Extremal {
                    delta: require_delta(scn)?,
                },
            };
            Ok(from_solution(solve_regularized_path(
                evo,
                grid,
                &f,
                &scn.eps_schedule,
                &stage,
                &opts,
            )?))
        }
    }
}

fn check(hypothesis: &'static str, status: CheckStatus, required: bool, detail: impl Into<String>) -> Check {
    Check {
        hypothesis,
        status,
        required,
        detail: detail.into(),
    }
}

fn pass_fail(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

/// Sampled checks of every declared hypothesis. Deterministic in `scn.seed`.
pub fn diagnose(scn: &Scenario) -> Result<Diagnostics> {
    let evo = &scn.evolution;
    let space = evo.space;
    let f = &scn.multimap;
    let b = scn.grid.b();
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let xs = sample_states(&mut rng, &space, 2 * scn.samples, scn.sample_scale);
    let times: Vec<f64> = (0..scn.samples).map(|_| rng.random_range(0.0..=b)).collect();
    let pairs: Vec<(StateVector, StateVector)> = xs.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
    let periodic = !matches!(scn.workflow, Workflow::Cauchy | Workflow::RegularizedPath);
    let multivalued = !matches!(scn.workflow, Workflow::Cauchy | Workflow::PeriodicFixedH);
    let mut checks = Vec::new();

    // Monotonicity is sampled at a few times so a modulation is exercised.
    let mut worst_mono = f64::INFINITY;
    let mut worst_coer = f64::INFINITY;
    let (mut monotone, mut strong_ok, mut coer_ok) = (true, true, true);
    for &t in times.iter().take(4) {
        let rep = check_monotone(&evo.op, t, &pairs, &space)?;
        monotone &= rep.monotone;
        strong_ok &= !rep.strong_monotonicity_violated;
        coer_ok &= !rep.coercivity_violated;
        worst_mono = worst_mono.min(rep.min_monotonicity_ratio.unwrap_or(f64::INFINITY));
        worst_coer = worst_coer.min(rep.min_coercivity_ratio.unwrap_or(f64::INFINITY));
    }
    let d = evo.op.declared;
    checks.push(check(
        "H(A) monotone",
        pass_fail(monotone),
        true,
        format!("min sampled ratio {worst_mono:.6e} over {} pairs", pairs.len()),
    ));
    checks.push(check(
        "H(A) strong monotonicity",
        pass_fail(strong_ok),
        periodic,
        format!("declared {:.6e}, min sampled ratio {worst_mono:.6e}", d.strong_monotonicity),
    ));
    checks.push(check(
        "H(A) coercivity",
        pass_fail(coer_ok),
        true,
        format!("declared {:.6e}, min sampled ratio {worst_coer:.6e}", d.coercivity),
    ));
    checks.push(check(
        "H(phi) proper convex lsc",
        CheckStatus::Pass,
        true,
        format!(
            "maximal monotone graph by construction, |d phi(0)| = {:.6e}",
            evo.phi.subdifferential_at_zero_norm(&space)
        ),
    ));

    let k = f.growth_constant(&space);
    let mut growth_ok = true;
    let mut worst_growth: f64 = 0.0;
    for (t, x) in times.iter().zip(&xs) {
        let n = f.set_norm(*t, x, &space)?;
        let bound = k * (1.0 + space.norm_of(x.as_slice()));
        worst_growth = worst_growth.max(n / bound.max(f64::MIN_POSITIVE));
        growth_ok &= n <= bound * (1.0 + 1e-9) + 1e-12;
    }
    checks.push(check(
        "H(F) linear growth",
        pass_fail(growth_ok),
        multivalued,
        format!("constant {k:.6e}, max sampled |F| / k(1 + |x|) = {worst_growth:.6e}"),
    ));

    match f.hartman_radius {
        Some(m) => {
            let samples: Vec<(f64, StateVector)> = times.iter().copied().zip(xs.iter().cloned()).collect();
            let rep = hartman_check(f, m, &samples, &space)?;
            checks.push(check(
                "Hartman",
                pass_fail(rep.passes),
                true,
                format!("radius {m:.6e}, min (h, x) = {:.6e} over {} samples", rep.min_inner, rep.samples_used),
            ));
        }
        None => checks.push(check("Hartman", CheckStatus::Unverified, false, "no radius declared")),
    }

    let relax = scn.workflow == Workflow::Relaxation;
    match f.declared_lipschitz {
        Some(l) => {
            let mut worst: f64 = 0.0;
            for ((x, y), t) in pairs.iter().zip(&times) {
                let dist = space.distance(x.as_slice(), y.as_slice());
                if dist > 0.0 {
                    worst = worst.max(hausdorff_between(f, *t, x, y, &space)? / dist);
                }
            }
            checks.push(check(
                "Lipschitz",
                pass_fail(worst <= l * (1.0 + 1e-9) + 1e-12),
                relax,
                format!("declared {l:.6e}, max sampled Hausdorff ratio {worst:.6e}"),
            ));
        }
        None => checks.push(check(
            "Lipschitz",
            CheckStatus::Unverified,
            relax,
            format!("no modulus declared, drift modulus {:.6e} used", f.lipschitz()),
        )),
    }

    let verified = checks
        .iter()
        .all(|c| c.status == CheckStatus::Pass || (c.status == CheckStatus::Unverified && !c.required));
    Ok(Diagnostics {
        scenario: scn.name.clone(),
        workflow: scn.workflow,
        seed: scn.seed,
        status: if verified { "verified" } else { "hypothesis-unverified" },
        checks,
        defaults: scn.defaults.clone(),
    })
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    scenario: &'a str,
    workflow: Workflow,
    status: &'static str,
    cauchy: Option<&'a CauchySummary>,
    periodic: Option<&'a PeriodicReport>,
    relaxation: Option<Vec<RelaxationRow>>,
}

#[derive(Serialize)]
struct FailureDoc<'a> {
    scenario: &'a str,
    workflow: Workflow,
    status: &'static str,
    kind: &'static str,
    message: String,
    /// Stage labels from the outermost to the innermost failure.
    stages: Vec<String>,
    residual_history: Option<&'a [f64]>,
}

fn unwind(e: &Error) -> (Vec<String>, &Error) {
    let mut stages = Vec::new();
    let mut cur = e;
    loop {
        match cur {
            Error::Stage { label, source } => {
                stages.push(label.clone());
                cur = source;
            }
            Error::Step { step, source } => {
                stages.push(format!("step {step}"));
                cur = source;
            }
            _ => return (stages, cur),
        }
    }
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
    Ok(path)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn remove_stale(dir: &Path, names: &[&str]) -> Result<()> {
    for n in names {
        match fs::remove_file(dir.join(n)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => return Err(e.into()),
            _ => {}
        }
    }
    Ok(())
}

const SUCCESS_FILES: [&str; 4] = ["trajectory.csv", "forcing.csv", "report.json", "relaxation.csv"];

/// Runs the scenario and writes its artifacts into `dir`. Solver failures are
/// reported through `failure.json` and the returned status rather than as `Err`.
pub fn run(scn: &Scenario, dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(dir)?;
    let diagnostics = diagnose(scn)?;
    let mut files = vec![write_atomic(dir, "diagnostics.json", &json(&diagnostics)?)?];
    let status = match execute(scn) {
        Ok(out) => {
            remove_stale(dir, &["failure.json", "relaxation.csv"])?;
            files.push(write_atomic(dir, "trajectory.csv", &out.trajectory.to_csv())?);
            files.push(write_atomic(dir, "forcing.csv", &out.forcing.to_csv())?);
            if let Some(run) = &out.relaxation {
                files.push(write_atomic(dir, "relaxation.csv", &relaxation_csv(run))?);
            }
            let doc = ReportDoc {
                scenario: &scn.name,
                workflow: scn.workflow,
                status: "ok",
                cauchy: out.cauchy.as_ref(),
                periodic: out.periodic.as_ref(),
                relaxation: out.relaxation.as_ref().map(relaxation_rows),
            };
            files.push(write_atomic(dir, "report.json", &json(&doc)?)?);
            RunStatus::Success
        }
        Err(e) => {
            remove_stale(dir, &SUCCESS_FILES)?;
            let (stages, root) = unwind(&e);
            let history = match root {
                Error::OuterNonconvergence { history, .. } => Some(history.as_slice()),
                _ => None,
            };
            let doc = FailureDoc {
                scenario: &scn.name,
                workflow: scn.workflow,
                status: "failed",
                kind: e.kind(),
                message: e.to_string(),
                stages,
                residual_history: history,
            };
            files.push(write_atomic(dir, "failure.json", &json(&doc)?)?);
            RunStatus::Failed {
                kind: e.kind(),
                message: e.to_string(),
            }
        }
    };
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        files,
        status,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{builtin, parse_scenario};

    #[test]
    fn cauchy_with_zero_data_gives_zero_csv() {
        let src = "name = \"z\"\nworkflow = \"cauchy\"\nseed = 1\n[grid]\nb = 1.0\nn_steps = 50\n[op]\nkind = \"scalar_linear\"\na = 1.0\n";
        let scn = parse_scenario(src).unwrap();
        let out = execute(&scn).unwrap();
        assert!(out.trajectory.states().iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn cos_periodic_starts_at_half() {
        let scn = builtin("cos_periodic").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let art = run(&scn, dir.path()).unwrap();
        assert_eq!(art.status, RunStatus::Success);
        let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[0], 0.0);
        assert!((row[1] - 0.5).abs() <= 5e-3, "{}", row[1]);
    }

    #[test]
    fn failures_are_structured() {
        let mut scn = builtin("convex_interval").unwrap();
        scn.periodic.outer_max = 1;
        scn.x0 = StateVector::scalar(1.0);
        let dir = tempfile::tempdir().unwrap();
        let art = run(&scn, dir.path()).unwrap();
        assert_eq!(art.status.exit_code(), 1);
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("failure.json")).unwrap()).unwrap();
        assert_eq!(doc["kind"], "outer_nonconvergence");
        assert!(!dir.path().join("trajectory.csv").exists());
    }

    #[test]
    fn diagnostics_flag_false_declarations() {
        let mut scn = builtin("convex_interval").unwrap();
        assert_eq!(diagnose(&scn).unwrap().status, "verified");
        scn.evolution.op.declared.strong_monotonicity = 5.0;
        let d = diagnose(&scn).unwrap();
        assert_eq!(d.status, "hypothesis-unverified");
        let c = d.checks.iter().find(|c| c.hypothesis == "H(A) strong monotonicity").unwrap();
        assert_eq!(c.status, CheckStatus::Fail);
    }

    #[test]
    fn ball_scenario_hartman_passes() {
        let scn = builtin("ball_invariance").unwrap();
        let d = diagnose(&scn).unwrap();
        let c = d.checks.iter().find(|c| c.hypothesis == "Hartman").unwrap();
        assert_eq!(c.status, CheckStatus::Pass, "{}", c.detail);
    }
}
