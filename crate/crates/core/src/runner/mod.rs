//! Experiment orchestration: runs one configured mode, writes its artifacts
//! and a manifest with content hashes.

mod config;

pub use config::{
    default_watch_modes, Datum, DatumEntry, Diagnostic, ExperimentConfig, Mode, NlsConfig, Scale,
    CascadeConfig, CompareConfig, ResonancesConfig, ResonantConfig, DEFAULT_CONFIG_TOML,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::approx::{convergence_study, CompareParams};
use crate::cascade::{
    cascade_report, consistency_ratio, envelope_check, fit_c, fit_c0, grid_noise_floor, ignition_check,
    CascadeSettings, FitWindow, RemainderFit, Verdict, EXACT_NOISE_FLOOR,
};
use crate::error::{Error, Result};
use crate::lattice::{
    box_modes, brute_force_resonances, enumerate_resonances, extremal_modes, five_mode_set,
    generate_mode_sets, write_mode_set, write_resonance_table, ModeIndex, ModeSet,
};
use crate::resonant::{ResonantSystem, Trajectory};
use crate::series::ModeSeries;
use crate::spectral::{self, evolve, write_checkpoint, NlsParams, SpectralGrid, SplitStepSolver};

/// Command-line overrides applied on top of a config.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub desk_scale: bool,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub mode: String,
    pub code_version: String,
    pub config_sha256: String,
    pub desk_scale: bool,
    pub deterministic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub pass_flags: BTreeMap<String, bool>,
    pub all_pass: bool,
    pub artifacts: Vec<Artifact>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.manifest.all_pass
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..])
}

struct Outputs {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    diagnostics: BTreeMap<String, f64>,
    flags: BTreeMap<String, bool>,
}

impl Outputs {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn diag(&mut self, key: &str, v: f64) {
        self.diagnostics.insert(key.to_string(), v);
    }

    fn flag(&mut self, key: &str, v: bool) {
        self.flags.insert(key.to_string(), v);
    }
}

/// Config after command-line overrides.
pub fn effective_config(config: &ExperimentConfig, opts: &RunOptions) -> ExperimentConfig {
    let mut c = config.clone();
    if opts.desk_scale {
        c.nls.desk_scale();
    }
    if let Some(dir) = &opts.out_dir {
        c.out_dir = dir.clone();
    }
    c
}

/// Validates, runs the configured mode and writes artifacts plus
/// `manifest.json` into the output directory.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let config = effective_config(config, opts);
    let diagnostics = config.validate();
    if !diagnostics.is_empty() {
        let text: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
        return Err(Error::Config(text.join("; ")));
    }
    let start = Instant::now();
    std::fs::create_dir_all(&config.out_dir)?;
    let config_text = config.to_toml()?;
    let mut out = Outputs {
        dir: config.out_dir.clone(),
        artifacts: Vec::new(),
        diagnostics: BTreeMap::new(),
        flags: BTreeMap::new(),
    };
    out.write("config.toml", config_text.as_bytes())?;
    match config.mode {
        Mode::Resonances => run_resonances(&config, &mut out)?,
        Mode::EvolveResonant => run_resonant(&config, &mut out)?,
        Mode::EvolveNls => run_nls(&config, &config.nls.datum, "nls_series.csv", &config.nls.watch_modes, &mut out)?,
        Mode::Compare => run_compare(&config, &mut out)?,
        Mode::CascadeReport => run_cascade(&config, &mut out)?,
        Mode::Figure1 => {
            let half = (config.nls.grid_k / 2) as i64;
            let axis: Vec<ModeIndex> = (0..=15).map(|n| ModeIndex::new(0, n)).filter(|j| j.max_norm() < half).collect();
            run_nls(&config, &Datum::FiveMode, "figure1.csv", &axis, &mut out)?
        }
        Mode::Figure2 => run_figure2(&config, &mut out)?,
    }
    let all_pass = out.flags.values().all(|&v| v);
    let manifest = Manifest {
        mode: config.mode.name().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        desk_scale: opts.desk_scale,
        deterministic: config.deterministic,
        wall_time_seconds: (!config.deterministic).then(|| start.elapsed().as_secs_f64()),
        diagnostics: out.diagnostics.clone(),
        pass_flags: out.flags.clone(),
        all_pass,
        artifacts: out.artifacts.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(config.out_dir.join("manifest.json"), text)?;
    Ok(RunOutcome {
        manifest,
        out_dir: config.out_dir.clone(),
    })
}

fn closed_form_mode_set(k: usize) -> ModeSet {
    let p = (k / 2) as u32;
    let r = 1i64 << p;
    box_modes(r)
        .into_iter()
        .filter(|j| if k % 2 == 0 { j.l1_norm() <= r } else { j.max_norm() <= r })
        .collect()
}

fn run_resonances(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let r = &config.resonances;
    let support = box_modes(r.support_radius);
    let mut equal = true;
    for &j in &r.targets {
        let fast = enumerate_resonances(j, &support);
        let slow = brute_force_resonances(j, &support);
        equal &= fast == slow;
        out.diag(&format!("triples_{}_{}", j.j1, j.j2), fast.len() as f64);
        out.write_with(&format!("resonances_{}_{}.txt", j.j1, j.j2), |w| write_resonance_table(w, j, &fast))?;
    }
    out.flag("oracle_equivalence", equal);

    let seq = generate_mode_sets(&five_mode_set(), r.generations)?;
    let mut closed = true;
    out.write_with("mode_sets.txt", |w| {
        use std::io::Write;
        for k in 0..seq.len() {
            writeln!(w, "# N^({k})")?;
            write_mode_set(&mut *w, seq.cumulative(k))?;
            // the squares describe the closure only up to N^(5); N^(6) is larger
            if k <= 5 {
                closed &= *seq.cumulative(k) == closed_form_mode_set(k);
            }
        }
        Ok(())
    })?;
    out.flag("mode_set_closed_forms", closed);
    Ok(())
}

fn relative_drift(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        b.abs()
    } else {
        ((b - a) / a).abs()
    }
}

fn run_resonant(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let r = &config.resonant;
    let system = ResonantSystem::new(r.truncation_radius, r.lambda).with_leak_tolerance(r.leak_tolerance);
    let a0 = r.datum.field(r.truncation_radius)?;
    let traj = system.integrate(&a0, r.horizon, r.dt, r.stride)?;
    out.write_with("resonant_series.csv", |w| traj.write_csv(w, &r.watch_modes, 1))?;
    let first = system.conserved(&traj.states[0]);
    let last = system.conserved(&traj.states[traj.len() - 1]);
    let drift_mass = relative_drift(first.mass, last.mass);
    let drift_h0 = relative_drift(first.h0, last.h0);
    let drift_z = relative_drift(first.z, last.z);
    out.diag("mass_drift", drift_mass);
    out.diag("h0_drift", drift_h0);
    out.diag("quartic_drift", drift_z);
    let (_, leak) = system.leak(&traj.states[traj.len() - 1]);
    out.diag("ring_forcing", leak);
    out.flag("conservation", drift_mass.max(drift_h0).max(drift_z) <= 1e-8);
    Ok(())
}

/// Initial grid and solver parameters for the `[nls]` section and `datum`.
pub fn nls_setup(n: &NlsConfig, datum: &Datum) -> Result<(SpectralGrid, NlsParams)> {
    let half = (n.grid_k / 2) as i64;
    let field = datum.field(half - 1)?;
    let (factor, coupling) = match n.scale() {
        Scale::Delta(d) => (d, 1.0),
        Scale::Epsilon(e) => (1.0, e),
    };
    let u0 = SpectralGrid::synthesize(n.grid_k, field.iter().map(|(j, a)| (j, a * factor)))?;
    let params = NlsParams {
        lambda: n.lambda,
        coupling,
        tau: n.tau,
        t_final: n.horizon(),
        k: n.grid_k,
        record_stride: n.record_stride,
        splitting: n.splitting,
        dealias: n.dealias,
    };
    Ok((u0, params))
}

fn mass_budget(steps: u64) -> f64 {
    1e-12 * (steps as f64 / 1e5).max(1.0)
}

fn run_nls(config: &ExperimentConfig, datum: &Datum, csv: &str, watch: &[ModeIndex], out: &mut Outputs) -> Result<()> {
    let (u0, params) = nls_setup(&config.nls, datum)?;
    let run = evolve(&u0, &params, watch)?;
    out.write_with(csv, |w| run.series.write_csv(w))?;
    if config.nls.checkpoint {
        let hash: [u8; 32] = Sha256::digest(config.to_toml()?.as_bytes()).into();
        let t = run.series.end_time();
        out.write_with("final.ckpt", |w| {
            write_checkpoint(w, &run.final_grid, t, &hash).map_err(|e| std::io::Error::other(e.to_string()))
        })?;
    }
    let drift = run.mass_drift();
    out.diag("mass_drift", drift);
    out.diag("steps", params.steps() as f64);
    out.diag("epsilon", config.nls.scale().epsilon());
    out.flag("mass_conservation", drift <= mass_budget(params.steps()));
    Ok(())
}

fn run_figure2(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let n = &config.nls;
    let (u0, params) = nls_setup(n, &Datum::Square)?;
    let eps = n.scale().epsilon();
    let bound = 10.0 * eps * eps;
    let mut solver = SplitStepSolver::new(&u0, params.clone())?;
    let k = params.k;
    let off_square: Vec<usize> = (0..k * k)
        .filter(|&i| {
            let j = ModeIndex::new(spectral::frequency(i / k, k), spectral::frequency(i % k, k));
            j.norm_sq() != 1
        })
        .collect();
    let watch = &n.watch_modes;
    let mut series = ModeSeries::new(watch.clone());
    let m0 = solver.mass();
    let mut worst = (0.0f64, 0.0f64, ModeIndex::ZERO);
    let mut drift = 0.0f64;
    series.push(0.0, watch.iter().map(|&j| solver.coefficient(j)));
    let steps = params.steps();
    for step in 1..=steps {
        solver.step()?;
        let c = solver.coefficients();
        for &i in &off_square {
            let a = c[i].norm();
            if a > worst.0 {
                let j = ModeIndex::new(spectral::frequency(i / k, k), spectral::frequency(i % k, k));
                worst = (a, solver.time(), j);
            }
        }
        if step % params.record_stride as u64 == 0 || step == steps {
            series.push(solver.time(), watch.iter().map(|&j| solver.coefficient(j)));
            drift = drift.max(relative_drift(m0, solver.mass()));
        }
    }
    out.write_with("figure2.csv", |w| series.write_csv(w))?;
    out.write_json(
        "figure2.json",
        &serde_json::json!({
            "epsilon": eps,
            "bound": bound,
            "max_off_square": worst.0,
            "at_time": worst.1,
            "at_mode": worst.2,
        }),
    )?;
    out.diag("max_off_square", worst.0);
    out.diag("off_square_bound", bound);
    out.diag("mass_drift", drift);
    out.flag("no_cascade", worst.0 < bound);
    out.flag("mass_conservation", drift <= mass_budget(steps));
    Ok(())
}

fn run_compare(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let c = &config.compare;
    let params = CompareParams {
        datum: c.datum.field(c.truncation_radius)?,
        lambda: c.lambda,
        grid_k: c.grid_k,
        tau: c.tau,
        compare_stride: c.compare_stride,
        resonant_dt: c.resonant_dt,
        resonant_radius: c.truncation_radius,
        splitting: spectral::Splitting::Strang,
        watch: Vec::new(),
    };
    let study = convergence_study(&c.epsilons, c.slow_horizon, &params)?;
    out.write_with("convergence.csv", |w| study.write_csv(w))?;
    let mut summary = study.summary_json();
    summary["ratios"] = serde_json::json!(study.ratios);
    out.write_json("convergence.json", &summary)?;
    for r in &study.reports {
        out.diag(&format!("sup_error_{}", r.epsilon), r.sup_error);
        out.diag(&format!("mass_drift_{}", r.epsilon), r.mass_drift);
    }
    out.diag("observed_order", study.observed_order);
    if study.reports.len() > 1 {
        out.flag("observed_order", (0.8..=1.2).contains(&study.observed_order));
        out.flag("halving_ratio", study.ratios.iter().all(|r| (0.3..=0.8).contains(r)));
    }
    Ok(())
}

/// Resonant cascade run at the configured `eps`, exposed for reuse.
pub fn cascade_resonant_run(c: &CascadeConfig) -> Result<Trajectory> {
    let system = ResonantSystem::new(c.truncation_radius, c.lambda);
    let a0 = Datum::FiveMode.field(c.truncation_radius)?;
    system.integrate(&a0, c.horizon, c.dt, 1)
}

pub fn cascade_settings(c: &CascadeConfig) -> CascadeSettings {
    CascadeSettings {
        gamma: c.gamma,
        theta: c.theta,
        alpha: c.alpha,
        window: FitWindow {
            start: c.window_start,
            end: c.window_end,
        },
        noise_floor: EXACT_NOISE_FLOOR,
        ..CascadeSettings::default()
    }
}

#[derive(Clone, Debug, Serialize)]
struct NlsCheck {
    fit_epsilon: f64,
    verify_epsilon: f64,
    remainder: RemainderFit,
    ignition: Vec<crate::cascade::IgnitionVerdict>,
    envelope_fit: crate::cascade::EnvelopeCheck,
    envelope_verify: crate::cascade::EnvelopeCheck,
    consistency_fit: f64,
    consistency_verify: f64,
}

fn run_cascade(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let c = &config.cascade;
    let traj = cascade_resonant_run(c)?;
    let series = ModeSeries::from_trajectory(&traj, &c.watch_modes, c.epsilon);
    let settings = cascade_settings(c);
    let c0 = fit_c0(&series, c.epsilon, c.lambda, c.max_generation);
    let mut report = cascade_report(&series, c.epsilon, c.lambda, &settings, None)?;
    out.flag(
        "resonant_fits",
        !report.records.is_empty() && report.records.iter().all(|r| r.exponent_pass && r.coefficient_pass),
    );
    let ignitions: Vec<Verdict> = report.records.iter().filter_map(|r| r.ignition).collect();
    out.flag("resonant_ignition", !ignitions.is_empty() && ignitions.iter().all(|v| *v == Verdict::Pass));

    let mut check = None;
    if let [e1, e2] = c.nls_epsilons[..] {
        let watch: Vec<ModeIndex> = (0..=c.max_generation).flat_map(|n| extremal_modes(n).into_iter()).collect();
        let params = CompareParams {
            datum: Datum::FiveMode.field(c.truncation_radius)?,
            lambda: c.lambda,
            grid_k: c.nls_grid_k,
            tau: c.nls_tau,
            compare_stride: 10,
            resonant_dt: 1e-3,
            resonant_radius: c.truncation_radius,
            splitting: spectral::Splitting::Strang,
            watch: watch.clone(),
        };
        let study = convergence_study(&[e1, e2], c.nls_slow_horizon, &params)?;
        let (fit_run, verify_run) = (&study.reports[0], &study.reports[1]);
        let remainder = RemainderFit {
            c0,
            c: fit_c(&fit_run.series, &fit_run.approximant, e1, c.max_generation)?,
        };
        let ignition = watch
            .iter()
            .filter(|j| j.norm_sq() == 2)
            .map(|&j| ignition_check(&fit_run.series, j, e1, c.gamma, grid_noise_floor(e1)))
            .collect::<Result<Vec<_>>>()?;
        let nc = NlsCheck {
            fit_epsilon: e1,
            verify_epsilon: e2,
            remainder,
            envelope_fit: envelope_check(&fit_run.series, e1, c.lambda, c.max_generation, remainder),
            envelope_verify: envelope_check(&verify_run.series, e2, c.lambda, c.max_generation, remainder),
            consistency_fit: consistency_ratio(&fit_run.series, e1, c.lambda, c.max_generation),
            consistency_verify: consistency_ratio(&verify_run.series, e2, c.lambda, c.max_generation),
            ignition,
        };
        out.flag("nls_ignition", !nc.ignition.is_empty() && nc.ignition.iter().all(|v| v.status == Verdict::Pass));
        out.flag("envelope_verify", nc.envelope_verify.holds);
        out.diag("C0", remainder.c0);
        out.diag("C", remainder.c);
        out.diag("envelope_verify_worst_ratio", nc.envelope_verify.worst_ratio);
        report.remainder = Some(remainder);
        check = Some(nc);
    } else {
        report.remainder = Some(RemainderFit { c0, c: 0.0 });
        out.diag("C0", c0);
    }
    out.write_with("cascade_series.csv", |w| series.write_csv(w))?;
    out.write_json("cascade_report.json", &serde_json::json!({ "resonant": report, "nls_check": check }))?;
    out.write("cascade_report.txt", report.to_table().as_bytes())?;
    Ok(())
}

/// Reads a config file, or the defaults when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}
