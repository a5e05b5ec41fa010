//! Experiment configuration: TOML with one section per stage.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cascade::{DEFAULT_ALPHA, DEFAULT_GAMMA, DEFAULT_THETA};
use crate::error::{Error, Result};
use crate::lattice::{extremal_modes, ModeIndex};
use crate::resonant::AmplitudeField;
use crate::spectral::{Dealias, Splitting};
use crate::Sign;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Resonances,
    EvolveResonant,
    EvolveNls,
    Compare,
    CascadeReport,
    #[default]
    Figure1,
    Figure2,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Resonances => "resonances",
            Mode::EvolveResonant => "evolve-resonant",
            Mode::EvolveNls => "evolve-nls",
            Mode::Compare => "compare",
            Mode::CascadeReport => "cascade-report",
            Mode::Figure1 => "figure1",
            Mode::Figure2 => "figure2",
        }
    }
}

/// One datum coefficient `[j1, j2, re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatumEntry(pub i64, pub i64, pub f64, pub f64);

impl DatumEntry {
    pub fn mode(&self) -> ModeIndex {
        ModeIndex::new(self.0, self.1)
    }
}

/// Named datum or an explicit coefficient list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Datum {
    /// `1 + 2 cos x1 + 2 cos x2`.
    #[default]
    FiveMode,
    /// `2 cos x1 + 2 cos x2`.
    Square,
    Custom(Vec<DatumEntry>),
}

impl Datum {
    pub fn field(&self, radius: i64) -> Result<AmplitudeField> {
        match self {
            Datum::FiveMode => Ok(AmplitudeField::five_mode_datum(radius)),
            Datum::Square => Ok(AmplitudeField::unit_square_datum(radius)),
            Datum::Custom(entries) => AmplitudeField::from_entries(
                radius,
                entries.iter().map(|e| (e.mode(), num_complex::Complex64::new(e.2, e.3))),
            ),
        }
    }

    pub fn modes(&self) -> Vec<ModeIndex> {
        match self {
            Datum::FiveMode => crate::lattice::five_mode_set().into_iter().collect(),
            Datum::Square => crate::lattice::unit_square_set().into_iter().collect(),
            Datum::Custom(entries) => entries.iter().map(DatumEntry::mode).collect(),
        }
    }
}

/// Axis modes `(0, n)`, `n = 0..=15`, followed by the extremal modes up to
/// generation 4.
pub fn default_watch_modes() -> Vec<ModeIndex> {
    let mut out: Vec<ModeIndex> = (0..=15).map(|n| ModeIndex::new(0, n)).collect();
    for n in 0..=4 {
        for j in extremal_modes(n) {
            if !out.contains(&j) {
                out.push(j);
            }
        }
    }
    out
}

fn extremal_up_to(n_max: u32) -> Vec<ModeIndex> {
    (0..=n_max).flat_map(|n| extremal_modes(n).into_iter()).collect()
}

pub const DEFAULT_DELTA: f64 = 0.0158;
pub const DESK_EPSILON: f64 = 0.02;
pub const DESK_GRID: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NlsConfig {
    pub lambda: Sign,
    /// Amplitude of the datum with unit coupling. Exclusive with `epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Coupling of the rescaled form with an O(1) datum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub grid_k: usize,
    pub tau: f64,
    /// Fast-time horizon; `1/eps` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    pub record_stride: usize,
    pub watch_modes: Vec<ModeIndex>,
    pub splitting: Splitting,
    pub dealias: Dealias,
    pub datum: Datum,
    /// Write a binary dump of the final grid.
    pub checkpoint: bool,
}

impl Default for NlsConfig {
    fn default() -> Self {
        NlsConfig {
            lambda: Sign::Plus,
            delta: Some(DEFAULT_DELTA),
            epsilon: None,
            grid_k: 128,
            tau: 1e-3,
            t_final: None,
            record_stride: 100,
            watch_modes: default_watch_modes(),
            splitting: Splitting::Strang,
            dealias: Dealias::Off,
            datum: Datum::FiveMode,
            checkpoint: true,
        }
    }
}

/// Resolved scale of an NLS run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    /// Datum multiplied by `delta`, coupling 1.
    Delta(f64),
    /// Datum as given, coupling `epsilon`.
    Epsilon(f64),
}

impl Scale {
    pub fn epsilon(self) -> f64 {
        match self {
            Scale::Delta(d) => d * d,
            Scale::Epsilon(e) => e,
        }
    }
}

impl NlsConfig {
    pub fn scale(&self) -> Scale {
        match (self.delta, self.epsilon) {
            (_, Some(e)) if self.delta.is_none() => Scale::Epsilon(e),
            (Some(d), _) => Scale::Delta(d),
            _ => Scale::Delta(DEFAULT_DELTA),
        }
    }

    pub fn horizon(&self) -> f64 {
        self.t_final.unwrap_or_else(|| 1.0 / self.scale().epsilon())
    }

    /// Acceptance-suite scale: `eps = 0.02` in the amplitude form, `K = 64`,
    /// horizon `1/eps`.
    pub fn desk_scale(&mut self) {
        self.delta = Some(DESK_EPSILON.sqrt());
        self.epsilon = None;
        self.grid_k = DESK_GRID;
        self.t_final = Some(1.0 / DESK_EPSILON);
        let half = (DESK_GRID / 2) as i64;
        self.watch_modes.retain(|j| j.max_norm() < half);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResonantConfig {
    pub lambda: Sign,
    pub truncation_radius: i64,
    pub dt: f64,
    /// Slow-time horizon.
    pub horizon: f64,
    pub stride: usize,
    pub datum: Datum,
    /// Absent disables the leak check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak_tolerance: Option<f64>,
    pub watch_modes: Vec<ModeIndex>,
}

impl Default for ResonantConfig {
    fn default() -> Self {
        ResonantConfig {
            lambda: Sign::Plus,
            truncation_radius: 6,
            dt: 1e-3,
            horizon: 0.5,
            stride: 10,
            datum: Datum::FiveMode,
            leak_tolerance: Some(crate::resonant::DEFAULT_LEAK_TOLERANCE),
            watch_modes: extremal_up_to(3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub lambda: Sign,
    pub epsilons: Vec<f64>,
    pub slow_horizon: f64,
    pub grid_k: usize,
    pub tau: f64,
    pub compare_stride: usize,
    pub resonant_dt: f64,
    pub truncation_radius: i64,
    pub datum: Datum,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            lambda: Sign::Plus,
            epsilons: vec![0.04, 0.02, 0.01],
            slow_horizon: 0.5,
            grid_k: 64,
            tau: 1e-3,
            compare_stride: 10,
            resonant_dt: 1e-3,
            truncation_radius: 6,
            datum: Datum::FiveMode,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    pub enabled: bool,
    pub lambda: Sign,
    pub gamma: f64,
    pub theta: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub truncation_radius: i64,
    pub dt: f64,
    /// Slow-time horizon of the resonant run.
    pub horizon: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub watch_modes: Vec<ModeIndex>,
    /// Generations entering the remainder fit.
    pub max_generation: u32,
    /// NLS cross-check: fit at the first value, verify at the second.
    pub nls_epsilons: Vec<f64>,
    pub nls_grid_k: usize,
    pub nls_tau: f64,
    pub nls_slow_horizon: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            enabled: true,
            lambda: Sign::Plus,
            gamma: DEFAULT_GAMMA,
            theta: DEFAULT_THETA,
            alpha: DEFAULT_ALPHA,
            epsilon: 1e-3,
            truncation_radius: 6,
            dt: 1e-4,
            horizon: 0.7,
            window_start: 1e-3,
            window_end: 1e-2,
            watch_modes: extremal_up_to(3),
            max_generation: 2,
            nls_epsilons: vec![0.02, 0.01],
            nls_grid_k: 64,
            nls_tau: 1e-3,
            nls_slow_horizon: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResonancesConfig {
    pub support_radius: i64,
    pub targets: Vec<ModeIndex>,
    /// Number of generations written to the mode-set file.
    pub generations: usize,
}

impl Default for ResonancesConfig {
    fn default() -> Self {
        ResonancesConfig {
            support_radius: 2,
            targets: vec![ModeIndex::new(1, 1)],
            generations: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub out_dir: PathBuf,
    /// Omit wall-clock data from the manifest so reruns are byte-identical.
    pub deterministic: bool,
    pub nls: NlsConfig,
    pub resonant: ResonantConfig,
    pub compare: CompareConfig,
    pub cascade: CascadeConfig,
    pub resonances: ResonancesConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Figure1,
            out_dir: PathBuf::from("out"),
            deterministic: true,
            nls: NlsConfig::default(),
            resonant: ResonantConfig::default(),
            compare: CompareConfig::default(),
            cascade: CascadeConfig::default(),
            resonances: ResonancesConfig::default(),
        }
    }
}

/// A named configuration problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Nonlinear phase per step above which the splitting is considered
/// under-resolved.
pub const MAX_NONLINEAR_PHASE: f64 = 0.1;
/// Steps larger than this under-resolve the O(1) linear dynamics.
pub const MAX_TAU: f64 = 0.05;

fn diag(out: &mut Vec<Diagnostic>, key: &str, message: impl Into<String>) {
    out.push(Diagnostic {
        key: key.into(),
        message: message.into(),
    });
}

fn check_positive(out: &mut Vec<Diagnostic>, key: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        diag(out, key, format!("must be positive, got {v}"));
    }
}

fn check_tau(out: &mut Vec<Diagnostic>, key: &str, tau: f64, coupling: f64, datum_norm: f64) {
    check_positive(out, key, tau);
    if tau >= MAX_TAU {
        diag(out, key, format!("tau = {tau} is not below {MAX_TAU}"));
    }
    let phase = tau * coupling * datum_norm * datum_norm;
    if phase >= MAX_NONLINEAR_PHASE {
        diag(out, key, format!("nonlinear phase per step {phase:.3} is not below {MAX_NONLINEAR_PHASE}"));
    }
}

fn check_grid(out: &mut Vec<Diagnostic>, key: &str, k: usize) {
    if k < 4 || k % 2 != 0 {
        diag(out, key, format!("grid size must be even and at least 4, got {k}"));
    }
}

fn check_datum(out: &mut Vec<Diagnostic>, key: &str, datum: &Datum, radius: i64) {
    if let Some(j) = datum.modes().into_iter().find(|j| j.max_norm() > radius) {
        diag(out, key, format!("datum mode {j} lies outside the box of radius {radius}"));
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Every problem that would make [`super::run`] reject the config.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mode = self.mode;
        match mode {
            Mode::EvolveNls | Mode::Figure1 | Mode::Figure2 => self.validate_nls(&mut out),
            Mode::EvolveResonant => self.validate_resonant(&mut out),
            Mode::Compare => self.validate_compare(&mut out),
            Mode::CascadeReport => self.validate_cascade(&mut out),
            Mode::Resonances => {
                let r = &self.resonances;
                if r.support_radius < 0 {
                    diag(&mut out, "resonances.support_radius", "must be non-negative");
                }
                if r.targets.is_empty() {
                    diag(&mut out, "resonances.targets", "at least one target required");
                }
            }
        }
        out
    }

    fn validate_nls(&self, out: &mut Vec<Diagnostic>) {
        let n = &self.nls;
        if n.delta.is_some() && n.epsilon.is_some() {
            diag(out, "nls.delta", "delta and epsilon are exclusive");
        }
        let scale = n.scale();
        match scale {
            Scale::Delta(d) => check_positive(out, "nls.delta", d),
            Scale::Epsilon(e) => check_positive(out, "nls.epsilon", e),
        }
        check_grid(out, "nls.grid_k", n.grid_k);
        let half = (n.grid_k / 2) as i64;
        if let Some(t) = n.t_final {
            if !(t >= 0.0 && t.is_finite()) {
                diag(out, "nls.t_final", "must be non-negative");
            }
        }
        if n.record_stride == 0 {
            diag(out, "nls.record_stride", "must be at least 1");
        }
        if let Some(j) = n.watch_modes.iter().find(|j| j.max_norm() >= half) {
            diag(out, "nls.watch_modes", format!("mode {j} is not resolved on a {0}x{0} grid", n.grid_k));
        }
        check_datum(out, "nls.datum", &n.datum, half - 1);
        let norm = n.datum.field(i64::MAX / 4).map(|f| f.wiener_norm()).unwrap_or(0.0);
        let (coupling, amp) = match scale {
            Scale::Delta(d) => (1.0, d * norm),
            Scale::Epsilon(e) => (e, norm),
        };
        check_tau(out, "nls.tau", n.tau, coupling, amp);
    }

    fn validate_resonant(&self, out: &mut Vec<Diagnostic>) {
        let r = &self.resonant;
        if r.truncation_radius < 1 {
            diag(out, "resonant.truncation_radius", "must be at least 1");
        }
        check_positive(out, "resonant.dt", r.dt);
        if !(r.horizon >= 0.0) {
            diag(out, "resonant.horizon", "must be non-negative");
        }
        if r.stride == 0 {
            diag(out, "resonant.stride", "must be at least 1");
        }
        if let Some(t) = r.leak_tolerance {
            check_positive(out, "resonant.leak_tolerance", t);
        }
        if let Some(j) = r.watch_modes.iter().find(|j| j.max_norm() > r.truncation_radius) {
            diag(
                out,
                "resonant.watch_modes",
                format!("mode {j} lies outside the truncation box of radius {}", r.truncation_radius),
            );
        }
        check_datum(out, "resonant.datum", &r.datum, r.truncation_radius);
    }

    fn validate_compare(&self, out: &mut Vec<Diagnostic>) {
        let c = &self.compare;
        if c.epsilons.is_empty() {
            diag(out, "compare.epsilons", "at least one value required");
        }
        if c.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) || c.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            diag(out, "compare.epsilons", "must lie in (0, 1) and strictly decrease");
        }
        check_positive(out, "compare.slow_horizon", c.slow_horizon);
        check_grid(out, "compare.grid_k", c.grid_k);
        check_positive(out, "compare.resonant_dt", c.resonant_dt);
        if c.compare_stride == 0 {
            diag(out, "compare.compare_stride", "must be at least 1");
        }
        if c.truncation_radius < 1 {
            diag(out, "compare.truncation_radius", "must be at least 1");
        }
        check_datum(out, "compare.datum", &c.datum, c.truncation_radius.min((c.grid_k / 2) as i64 - 1));
        let norm = c.datum.field(i64::MAX / 4).map(|f| f.wiener_norm()).unwrap_or(0.0);
        let eps = c.epsilons.first().copied().unwrap_or(0.0);
        check_tau(out, "compare.tau", c.tau, eps, norm);
    }

    fn validate_cascade(&self, out: &mut Vec<Diagnostic>) {
        let c = &self.cascade;
        if !c.enabled {
            return;
        }
        if !(c.theta > 0.0 && c.theta < 0.25) {
            diag(out, "cascade.theta", format!("theta = {} violates the localization hypothesis 0 < theta < 1/4", c.theta));
        }
        if !(c.gamma > 0.0 && c.gamma < 1.0) {
            diag(out, "cascade.gamma", "must lie in (0, 1)");
        }
        check_positive(out, "cascade.alpha", c.alpha);
        if !(c.epsilon > 0.0 && c.epsilon < 1.0) {
            diag(out, "cascade.epsilon", "must lie in (0, 1)");
        }
        check_positive(out, "cascade.dt", c.dt);
        check_positive(out, "cascade.horizon", c.horizon);
        if !(c.window_start > 0.0 && c.window_end > c.window_start) {
            diag(out, "cascade.window_start", "need 0 < window_start < window_end");
        }
        if c.window_end > c.horizon {
            diag(out, "cascade.window_end", "fit window extends past the horizon");
        }
        if let Some(j) = c.watch_modes.iter().find(|j| j.max_norm() > c.truncation_radius) {
            diag(
                out,
                "cascade.watch_modes",
                format!("mode {j} lies outside the truncation box of radius {}", c.truncation_radius),
            );
        }
        if !c.nls_epsilons.is_empty() {
            if c.nls_epsilons.len() != 2 || c.nls_epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) || c.nls_epsilons[1] >= c.nls_epsilons[0] {
                diag(out, "cascade.nls_epsilons", "need two decreasing values in (0, 1): fit, then verify");
            }
            check_grid(out, "cascade.nls_grid_k", c.nls_grid_k);
            check_positive(out, "cascade.nls_slow_horizon", c.nls_slow_horizon);
            let eps = c.nls_epsilons.first().copied().unwrap_or(0.0);
            check_tau(out, "cascade.nls_tau", c.nls_tau, eps, 5.0);
        }
    }
}

/// Default configuration with provenance notes: `[ref]` marks values of
/// the reference experiment, `[chosen]` values picked for this code.
pub const DEFAULT_CONFIG_TOML: &str = r#"# nls-cascade experiment configuration.
# [ref]     value of the reference numerical experiment
# [chosen]  picked here where the reference is silent

mode = "figure1"
out_dir = "out"
# Omit wall-clock data from the manifest so reruns are byte-identical.
deterministic = true

[nls]
lambda = 1                 # [ref] defocusing
delta = 0.0158             # [ref] datum amplitude; or set `epsilon` instead (exclusive)
grid_k = 128               # [ref]
tau = 0.001                # [ref]
# t_final defaults to 1/delta^2                                    [chosen]
record_stride = 100        # [chosen]
splitting = "strang"       # [ref] half linear, full nonlinear, half linear
dealias = "off"            # [chosen]
datum = "five_mode"        # [ref] 1 + 2cos x1 + 2cos x2; "square" or { custom = [[j1, j2, re, im], ...] }
checkpoint = true          # [chosen]
# axis modes (0,n), n <= 15 [ref], then extremal modes up to generation 4 [chosen]
watch_modes = [[0, 0], [0, 1], [0, 2], [0, 3], [0, 4], [0, 5], [0, 6], [0, 7], [0, 8], [0, 9], [0, 10], [0, 11], [0, 12], [0, 13], [0, 14], [0, 15], [-1, 0], [0, -1], [1, 0], [-1, -1], [-1, 1], [1, -1], [1, 1], [-2, 0], [0, -2], [2, 0], [-2, -2], [-2, 2], [2, -2], [2, 2], [-4, 0], [0, -4], [4, 0]]

[resonant]
lambda = 1                 # [ref]
truncation_radius = 6      # [chosen]
dt = 0.001                 # [chosen]
horizon = 0.5              # [chosen] slow time
stride = 10                # [chosen]
datum = "five_mode"        # [ref]
leak_tolerance = 1e-6      # [chosen]; remove to disable the leak check
watch_modes = [[-1, 0], [0, -1], [0, 1], [1, 0], [-1, -1], [-1, 1], [1, -1], [1, 1], [-2, 0], [0, -2], [0, 2], [2, 0], [-2, -2], [-2, 2], [2, -2], [2, 2]]

[compare]
lambda = 1                 # [ref]
epsilons = [0.04, 0.02, 0.01]  # [chosen]
slow_horizon = 0.5         # [chosen]
grid_k = 64                # [chosen]
tau = 0.001                # [ref]
compare_stride = 10        # [chosen]
resonant_dt = 0.001        # [chosen]
truncation_radius = 6      # [chosen]
datum = "five_mode"        # [ref]

[cascade]
enabled = true
lambda = 1                 # [ref]
gamma = 0.5                # [chosen]
theta = 0.2                # [chosen] must stay below 1/4
alpha = 1.0                # [chosen]
epsilon = 0.001            # [chosen]
truncation_radius = 6      # [chosen]
dt = 0.0001                # [chosen]
horizon = 0.7              # [chosen] slow time
window_start = 0.001       # [chosen]
window_end = 0.01          # [chosen]
max_generation = 2         # [chosen]
nls_epsilons = [0.02, 0.01]  # [chosen] fit at the first, verify at the second
nls_grid_k = 64            # [chosen]
nls_tau = 0.001            # [ref]
nls_slow_horizon = 0.5     # [chosen]
watch_modes = [[-1, 0], [0, -1], [0, 1], [1, 0], [-1, -1], [-1, 1], [1, -1], [1, 1], [-2, 0], [0, -2], [0, 2], [2, 0], [-2, -2], [-2, 2], [2, -2], [2, 2]]

[resonances]
support_radius = 2         # [chosen]
targets = [[1, 1]]         # [chosen]
generations = 5            # [chosen]
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotated_default_matches_default() {
        let parsed = ExperimentConfig::from_toml(DEFAULT_CONFIG_TOML).unwrap();
        assert_eq!(parsed, ExperimentConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::default();
        c.mode = Mode::Compare;
        c.nls.delta = None;
        c.nls.epsilon = Some(0.02);
        c.nls.t_final = Some(12.5);
        c.nls.datum = Datum::Custom(vec![DatumEntry(1, 0, 0.5, -0.25), DatumEntry(0, 0, 1.0, 0.0)]);
        c.resonant.leak_tolerance = None;
        c.nls.lambda = Sign::Minus;
        c.nls.splitting = Splitting::Lie;
        c.nls.dealias = Dealias::TwoThirds;
        let text = c.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(ExperimentConfig::from_toml(&back.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn partial_sections_take_defaults() {
        let c = ExperimentConfig::from_toml("mode = \"evolve-nls\"\n[nls]\nepsilon = 0.02\n").unwrap();
        assert_eq!(c.mode, Mode::EvolveNls);
        assert_eq!(c.nls.scale(), Scale::Epsilon(0.02));
        assert_eq!(c.nls.grid_k, 128);
        assert!((c.nls.horizon() - 50.0).abs() < 1e-12);
        assert!(c.validate().is_empty(), "{:?}", c.validate());
        assert!(ExperimentConfig::from_toml("mode = \"nope\"").is_err());
        assert!(ExperimentConfig::from_toml("[nls]\nlambda = 2").is_err());
    }

    #[test]
    fn default_config_is_valid_in_every_mode() {
        for mode in [
            Mode::Resonances,
            Mode::EvolveResonant,
            Mode::EvolveNls,
            Mode::Compare,
            Mode::CascadeReport,
            Mode::Figure1,
            Mode::Figure2,
        ] {
            let c = ExperimentConfig { mode, ..Default::default() };
            assert!(c.validate().is_empty(), "{mode:?}: {:?}", c.validate());
        }
    }

    #[test]
    fn diagnostics() {
        let mut c = ExperimentConfig { mode: Mode::CascadeReport, ..Default::default() };
        c.cascade.theta = 0.3;
        let d = c.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].key, "cascade.theta");

        let mut c = ExperimentConfig { mode: Mode::EvolveResonant, ..Default::default() };
        c.resonant.truncation_radius = 4;
        c.resonant.watch_modes = vec![ModeIndex::new(9, 9)];
        let d = c.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].key, "resonant.watch_modes");

        let mut c = ExperimentConfig { mode: Mode::EvolveNls, ..Default::default() };
        c.nls.epsilon = Some(0.02);
        assert_eq!(c.validate()[0].key, "nls.delta");

        let mut c = ExperimentConfig { mode: Mode::EvolveNls, ..Default::default() };
        c.nls.tau = 0.2;
        assert!(c.validate().iter().all(|d| d.key == "nls.tau"));
        assert!(!c.validate().is_empty());
    }

    #[test]
    fn desk_scale() {
        let mut n = NlsConfig::default();
        n.desk_scale();
        assert_eq!(n.grid_k, 64);
        assert!((n.scale().epsilon() - 0.02).abs() < 1e-15);
        assert!((n.horizon() - 50.0).abs() < 1e-12);
        assert!(n.watch_modes.iter().all(|j| j.max_norm() < 32));
    }
}
