use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bridge::bridge;
use crate::dynamics::{
    catch_up_monotone, catch_up_with, length_study_with, ode_orbit, verify_state_dependent_inclusion, CatchUpOptions,
    Trajectory, TrajectoryStatus,
};
use crate::linalg;
use crate::projection::ProjectionOptions;
use crate::variational::{
    desingularize, talweg_profile, verify_desingularized, verify_monotone_bound, verify_speed_bound, LipOptions,
    TalwegProfile,
};

use super::scenario::{Checks, Experiment, Scenario};
use super::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub experiment: String,
    pub checks: Vec<CheckEntry>,
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    fn new(sc: &Scenario) -> Self {
        RunReport {
            scenario: sc.name.clone(),
            experiment: sc.experiment.as_str().to_string(),
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn status(&self, name: &str) -> Option<Status> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.status)
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.checks.push(CheckEntry {
            name: name.to_string(),
            status: if ok { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        });
    }

    fn warn(&mut self, name: &str, detail: impl Into<String>) {
        self.checks.push(CheckEntry {
            name: name.to_string(),
            status: Status::Warn,
            detail: detail.into(),
        });
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report fields are plain data")
    }
}

/// Root under which scenario outputs go: `SWEEP_OUTPUT_ROOT` or `./out`.
pub fn output_root() -> PathBuf {
    std::env::var_os(super::OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn lip_options(sc: &Scenario) -> LipOptions {
    LipOptions {
        seed: sc.seed,
        ..LipOptions::default()
    }
}

fn catch_up_options(sc: &Scenario) -> CatchUpOptions {
    CatchUpOptions {
        projection: ProjectionOptions {
            seed: sc.seed,
            ..ProjectionOptions::default()
        },
        ..CatchUpOptions::default()
    }
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    fn write(&mut self, file: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(file);
        let io_err = |e: std::io::Error| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
        self.written.push(path.display().to_string());
        Ok(())
    }
}

/// Runs the scenario, writes its CSV artifacts and `report.toml` under
/// `root/<output_dir>`, and returns the report. Module errors become a
/// failed `run` check.
pub fn run_in(sc: &Scenario, root: &Path) -> Result<RunReport, CliError> {
    let dir = root.join(sc.output_dir());
    fs::create_dir_all(&dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut report = RunReport::new(sc);
    let mut art = Artifacts {
        dir: dir.clone(),
        written: Vec::new(),
    };
    let outcome = match sc.experiment {
        Experiment::Sweep => run_sweep(sc, &mut report, &mut art),
        Experiment::LengthStudy => run_length_study(sc, &mut report, &mut art),
        Experiment::Talweg => run_talweg(sc, &mut report, &mut art).map(|_| ()),
        Experiment::Desingularize => run_desingularize(sc, &mut report, &mut art),
        Experiment::Bridge => run_bridge(sc, &mut report, &mut art),
        Experiment::Statedep => run_statedep(sc, &mut report, &mut art),
        Experiment::Monotone => run_monotone(sc, &mut report, &mut art),
    };
    match outcome {
        Ok(()) => {}
        Err(e @ CliError::Io { .. }) => return Err(e),
        Err(e) => report.check("run", false, e.to_string()),
    }
    report.artifacts = art.written;
    let report_path = dir.join("report.toml");
    fs::write(&report_path, report.to_toml()).map_err(|e| CliError::Io {
        path: report_path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(report)
}

pub fn run(sc: &Scenario) -> Result<RunReport, CliError> {
    run_in(sc, &output_root())
}

fn module<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Module(e.to_string())
}

fn status_note(tr: &Trajectory, report: &mut RunReport) {
    match tr.status {
        TrajectoryStatus::Completed => {}
        TrajectoryStatus::EmptySweptSet { t } => report.warn("status", format!("S(t) empty at t = {t}; stopped")),
        TrajectoryStatus::Diverged { t } => report.warn("status", format!("diverged at t = {t}")),
    }
    if !tr.warnings.is_empty() {
        report.warn(
            "projection",
            format!("{} nodes with unconverged projections", tr.warnings.len()),
        );
    }
}

fn speed_checks(sc: &Scenario, tr: &Trajectory, report: &mut RunReport) -> Result<(), CliError> {
    let c = &sc.checks;
    if let Some(slack) = c.speed_slack {
        let fam = sc.family()?;
        let chk = verify_speed_bound(tr, &fam, &lip_options(sc)).map_err(module)?;
        report.metric("max_ratio", chk.max_ratio);
        report.check(
            "speed_bound",
            chk.passes(slack),
            format!("max ratio {:.6}, {} violations", chk.max_ratio, chk.violations.len()),
        );
    }
    lipschitz_check(c, tr, report);
    Ok(())
}

fn lipschitz_check(c: &Checks, tr: &Trajectory, report: &mut RunReport) {
    let Some(l) = c.lipschitz else { return };
    let mut worst: f64 = 0.0;
    for k in 0..tr.steps() {
        let dt = tr.times[k + 1] - tr.times[k];
        let dx = linalg::dist(&tr.points[k + 1], tr.step_origin(k));
        worst = worst.max(dx / (l * dt));
    }
    report.metric("max_step_over_lh", worst);
    report.check(
        "lipschitz_steps",
        worst <= 1.05 && tr.breakpoints.is_empty(),
        format!("max |dx|/(L h) = {worst:.6}, {} breakpoints", tr.breakpoints.len()),
    );
}

fn length_check(c: &Checks, length: f64, report: &mut RunReport) {
    if let Some(expected) = c.expected_length {
        let rel = (length - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        report.check(
            "length",
            rel <= c.length_rel_tol,
            format!("length {length:.9} vs {expected}, relative error {rel:.3e}"),
        );
    }
}

fn run_sweep(sc: &Scenario, report: &mut RunReport, art: &mut Artifacts) -> Result<(), CliError> {
    let fam = sc.family()?;
    let tr = catch_up_with(&fam, sc.x0()?, sc.t0, sc.t_end()?, sc.h()?, &catch_up_options(sc)).map_err(module)?;
    art.write("trajectory.csv", |w| tr.write_csv(w))?;
    report.metric("total_length", tr.total_length());
    report.metric("steps", tr.steps() as f64);
    report.metric("breakpoints", tr.breakpoints.len() as f64);
    status_note(&tr, report);
    speed_checks(sc, &tr, report)?;
    length_check(&sc.checks, tr.total_length(), report);
    Ok(())
}

fn run_length_study(sc: &Scenario, report: &mut RunReport, art: &mut Artifacts) -> Result<(), CliError> {
    let fam = sc.family()?;
    let h_list = sc.h_list.clone().unwrap_or_default();
    let study = length_study_with(&fam, sc.x0()?, sc.t0, sc.t_end()?, &h_list, &catch_up_options(sc)).map_err(module)?;
    art.write("lengths.csv", |w| {
        writeln!(w, "h,length,gap")?;
        for (i, (h, l)) in study.rows.iter().enumerate() {
            let gap = if i == 0 { String::new() } else { crate::dynamics::fmt_f64(study.gaps[i - 1]) };
            writeln!(w, "{},{},{}", crate::dynamics::fmt_f64(*h), crate::dynamics::fmt_f64(*l), gap)?;
        }
        Ok(())
    })?;
    let last = study.final_length();
    report.metric("total_length", last);
    for (i, g) in study.gaps.iter().enumerate() {
        report.metric(&format!("gap_{i}"), *g);
    }
    length_check(&sc.checks, last, report);
    if sc.checks.gaps_decreasing == Some(true) {
        let floor = sc.checks.gap_floor * last.abs();
        report.check(
            "cauchy_gaps",
            study.gaps_decreasing(floor),
            format!("gaps {:?} (rounding floor {floor:.1e})", study.gaps),
        );
    }
    Ok(())
}

fn run_talweg(sc: &Scenario, report: &mut RunReport, art: &mut Artifacts) -> Result<TalwegProfile, CliError> {
    let fam = sc.family()?;
    let region = sc.region(fam.dim())?;
    let grid = sc.r_grid()?;
    let prof = talweg_profile(&fam, &region, &grid, sc.samples, sc.seed).map_err(module)?;
    art.write("talweg.csv", |w| prof.write_csv(w))?;
    let finite = prof.phi.iter().zip(&prof.infinite).filter(|(_, &i)| !i).map(|(p, _)| *p);
    report.metric("max_phi", finite.fold(0.0, f64::max));
    report.metric("empty_knots", prof.empty.iter().filter(|&&e| e).count() as f64);
    if let Some((c, p)) = sc.checks.phi_power {
        let mut worst: f64 = 0.0;
        for i in 0..prof.len() {
            if prof.empty[i] {
                continue;
            }
            let exact = c * prof.r_grid[i].powf(p);
            let got = if prof.infinite[i] { f64::INFINITY } else { prof.phi[i] };
            worst = worst.max((got / exact - 1.0).abs());
        }
        report.metric("phi_max_rel_error", worst);
        report.check(
            "talweg_oracle",
            worst <= sc.checks.phi_rel_tol,
            format!("max relative error {worst:.4} against {c} r^{p}"),
        );
    }
    Ok(prof)
}

fn run_desingularize(sc: &Scenario, report: &mut RunReport, art: &mut Artifacts) -> Result<(), CliError> {
    let prof = run_talweg(sc, report, art)?;
    let fam = sc.family()?;
    let region = sc.region(fam.dim())?;
    let a = sc.a.unwrap_or(prof.r_grid[0]);
    let map = desingularize(&prof, a).map_err(module)?;
    art.write("desing.csv", |w| map.write_csv(w))?;
    report.metric("quad_error", map.quad_error);
    if let Some((c, p)) = sc.checks.big_phi_power {
        let n = map.knots.len();
        let worst = (1..n.saturating_sub(1))
            .map(|i| (map.big_phi[i] / (c * map.knots[i].powf(p)) - 1.0).abs())
            .fold(0.0, f64::max);
        report.metric("big_phi_max_rel_error", worst);
        report.check(
            "phi_integral_oracle",
            worst <= sc.checks.big_phi_rel_tol,
            format!("max relative error {worst:.4} against {c} r^{p} on interior knots"),
        );
    }
    // probes spread over the interior of the s-window
    let (lo, hi) = map.s_domain();
    let m = sc.probes;
    let probes: Vec<f64> = (1..=m).map(|i| lo + (hi - lo) * i as f64 / (m + 1) as f64).collect();
    let samples = (sc.samples / 16).max(2);
    let chk = verify_desingularized(&fam, &map, &region, &probes, samples, &lip_options(sc)).map_err(module)?;
    art.write("desing_probes.csv", |w| {
        writeln!(w, "s,composed_lip,chain_ratio")?;
        for i in 0..probes.len() {
            writeln!(
                w,
                "{},{},{}",
                crate::dynamics::fmt_f64(probes[i]),
                crate::dynamics::fmt_f64(chk.composed_lip[i]),
                crate::dynamics::fmt_f64(chk.chain_ratios[i])
            )?;
        }
        Ok(())
    })?;
    let worst_chain = chk.chain_ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    report.metric("max_lip_composed", chk.max_lip);
    report.metric("max_chain_deviation", worst_chain);
    if let Some(slack) = sc.checks.desing_slack {
        report.check(
            "desing_bound",
            chk.max_lip <= 1.0 + slack,
            format!("max lip of S∘Psi {:.6} at {m} probes", chk.max_lip),
        );
        report.check(
            "chain_rule",
            worst_chain <= slack,
            format!("max |ratio - 1| = {worst_chain:.4}"),
        );
    }
    Ok(())
}

fn run_bridge(sc: &Scenario, report: &mut RunReport, art: &mut Artifacts) -> Result<(), CliError> {
    let f = sc.f.as_ref().expect("validated").build("f")?;
    let res = bridge(&f, sc.x0()?, sc.t_end()?, sc.h()?).map_err(module)?;
    art.write("bridge.csv", |w| res.write_csv(w))?;
    art.write("flow.csv", |w| res.flow.trajectory.write_csv(w))?;
    let (lf, ls) = (res.flow.trajectory.total_length(), res.swept.curve.total_length());
    report.metric("max_inclusion_residual", res.max_inclusion_residual());
    report.metric("max_value_residual", res.max_value_residual());
    report.metric("flow_length", lf);
    report.metric("swept_length", ls);
    report.metric("final_value", res.flow.final_value);
    let c = &sc.checks;
    if let Some(tol) = c.max_inclusion_residual {
        let v = res.max_inclusion_residual();
        report.check("inclusion_residual", v <= tol, format!("max angle {v:.3e} rad"));
    }
    if let Some(tol) = c.max_value_residual {
        let v = res.max_value_residual();
        report.check("value_residual", v <= tol, format!("max value residual {v:.3e}"));
    }
    if let Some(tol) = c.length_agreement {
        let rel = (lf - ls).abs() / lf.max(f64::MIN_POSITIVE);
        report.check("length_agreement", rel <= tol, format!("flow {lf:.9}, swept {ls:.9}"));
    }
    if let Some((c0, c1, s_max)) = c.norm_profile {
        let cv = &res.swept.curve;
        let mut worst: f64 = 0.0;
        for (s, u) in cv.times.iter().zip(&cv.points) {
            if *s <= s_max {
                worst = worst.max((linalg::norm(u) / (c0 + c1 * s).sqrt() - 1.0).abs());
            }
        }
        report.metric("norm_profile_rel_error", worst);
        report.check(
            "norm_profile",
            worst <= c.length_rel_tol,
            format!("max relative error {worst:.3e} on [0, {s_max}]"),
        );
    }
    if let Some(slack) = c.speed_slack {
        let fam = res.family(&f).map_err(module)?;
        let chk = verify_speed_bound(&res.swept.curve, &fam, &lip_options(sc)).map_err(module)?;
        report.metric("max_ratio", chk.max_ratio);
        report.check("speed_bound", chk.passes(slack), format!("max ratio {:.6}", chk.max_ratio));
    }
    Ok(())
}

fn run_statedep(sc: &Scenario, report: &mut RunReport, art: &mut Artifacts) -> Result<(), CliError> {
    let field = sc.field.as_ref().expect("validated").build()?;
    let tr = ode_orbit(&field, sc.x0()?, sc.t_end()?, sc.h()?).map_err(module)?;
    art.write("orbit.csv", |w| tr.write_csv(w))?;
    status_note(&tr, report);
    let inc = verify_state_dependent_inclusion(&tr, &field);
    report.metric("max_inclusion_residual", inc.max_residual);
    report.metric("skipped_nodes", inc.skipped as f64);
    report.metric("max_norm", tr.max_norm());
    report.metric("total_length", tr.total_length());
    let c = &sc.checks;
    if let Some(tol) = c.max_inclusion_residual {
        report.check(
            "inclusion_residual",
            inc.max_residual <= tol,
            format!("max residual {:.3e}", inc.max_residual),
        );
    }
    if let Some(bound) = c.max_norm {
        let v = tr.max_norm();
        report.check("bounded_orbit", v <= bound, format!("sup |x| = {v:.9}"));
    }
    if let Some(rate) = c.length_rate {
        let mut worst: f64 = 0.0;
        let mut detail = Vec::new();
        for &t in &c.rate_times {
            let r = tr.length_at(t).map_or(f64::NAN, |l| l / t);
            detail.push(format!("L({t})/{t} = {r:.6}"));
            let dev = (r / rate - 1.0).abs();
            worst = if dev.is_nan() { f64::INFINITY } else { worst.max(dev) };
        }
        report.check("length_rate", worst <= c.length_rel_tol, detail.join(", "));
    }
    Ok(())
}

fn run_monotone(sc: &Scenario, report: &mut RunReport, art: &mut Artifacts) -> Result<(), CliError> {
    let fam = sc.family()?;
    let field = sc.field.as_ref().expect("validated").build()?;
    let region = sc.region(fam.dim())?;
    field.validate_monotonicity(&region, 256, sc.seed).map_err(module)?;
    let tr = catch_up_monotone(&fam, &field, sc.x0()?, sc.t0, sc.t_end()?, sc.h()?, &catch_up_options(sc))
        .map_err(module)?;
    art.write("trajectory.csv", |w| tr.write_csv(w))?;
    status_note(&tr, report);
    let mean_speed = tr.step_speeds.iter().sum::<f64>() / tr.steps().max(1) as f64;
    report.metric("mean_speed", mean_speed);
    report.metric("total_length", tr.total_length());
    let c = &sc.checks;
    if let Some(slack) = c.speed_slack {
        let chk = verify_monotone_bound(&tr, &field, &fam, &lip_options(sc)).map_err(module)?;
        report.metric("max_ratio", chk.max_ratio);
        report.check("monotone_bound", chk.passes(slack), format!("max ratio {:.6}", chk.max_ratio));
    }
    if let Some(v) = c.expected_speed {
        let tol = c.speed_tol.unwrap_or(1e-3);
        let worst = tr.step_speeds.iter().map(|s| (s - v).abs()).fold(0.0, f64::max);
        report.check("speed_value", worst <= tol, format!("max |speed - {v}| = {worst:.3e}"));
    }
    lipschitz_check(c, &tr, report);
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteEntry {
    pub file: String,
    pub scenario: Option<String>,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub passed: bool,
    pub entries: Vec<SuiteEntry>,
}

/// Runs every `*.toml` scenario in `dir` with up to `jobs` threads. Files
/// are processed in name order and the summary lists them in that order.
pub fn run_suite_in(dir: &Path, jobs: usize, root: &Path) -> Result<SuiteReport, CliError> {
    let io = |e: std::io::Error| CliError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        log::warn!("no scenario files in {}", dir.display());
    }
    let loaded: Vec<(PathBuf, Result<Scenario, CliError>)> =
        files.into_iter().map(|p| (p.clone(), super::load_scenario(&p))).collect();
    let mut seen = BTreeMap::new();
    for (p, sc) in &loaded {
        if let Ok(sc) = sc {
            if let Some(prev) = seen.insert(sc.name.clone(), p.clone()) {
                return Err(CliError::DuplicateName {
                    name: sc.name.clone(),
                    first: prev.display().to_string(),
                    second: p.display().to_string(),
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let entries: Vec<SuiteEntry> = pool.install(|| {
        use rayon::prelude::*;
        loaded
            .par_iter()
            .map(|(p, sc)| {
                let file = p.display().to_string();
                match sc {
                    Err(e) => SuiteEntry {
                        file,
                        scenario: None,
                        passed: false,
                        error: Some(e.to_string()),
                    },
                    Ok(sc) => match run_in(sc, root) {
                        Ok(r) => SuiteEntry {
                            file,
                            scenario: Some(sc.name.clone()),
                            passed: r.passed(),
                            error: None,
                        },
                        Err(e) => SuiteEntry {
                            file,
                            scenario: Some(sc.name.clone()),
                            passed: false,
                            error: Some(e.to_string()),
                        },
                    },
                }
            })
            .collect()
    });
    let report = SuiteReport {
        passed: entries.iter().all(|e| e.passed),
        entries,
    };
    fs::create_dir_all(root).map_err(io)?;
    let summary = root.join("suite_summary.toml");
    fs::write(&summary, toml::to_string(&report).expect("plain data")).map_err(|e| CliError::Io {
        path: summary.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(report)
}

pub fn run_suite(dir: &Path, jobs: usize) -> Result<SuiteReport, CliError> {
    run_suite_in(dir, jobs, &output_root())
}
