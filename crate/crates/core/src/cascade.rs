//! Cascade diagnostics on mode time series: power-law fits, ignition at the
//! layer times, the spectral-localization bound and fitted remainder
//! constants.
//!
//! All comparisons against `c(n) (eps t)^alpha(n)` are made on the
//! demodulated coefficient `u_j(t) e^{i t |j|^2}`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{extremal_generation, ModeIndex};
use crate::resonant::{taylor_coefficient, taylor_exponent};
use crate::series::ModeSeries;
use crate::Sign;

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_THETA: f64 = 0.2;
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Geometric sample points per octave used by the fits.
const SAMPLES_PER_OCTAVE: f64 = 16.0;

/// Fast time `2 / eps^(1 - gamma / (|j|^2 - 1))` at which mode `j` must
/// have ignited.
pub fn layer_time(epsilon: f64, gamma: f64, j: ModeIndex) -> Result<f64> {
    let w = j.norm_sq();
    if w < 2 {
        return Err(Error::NoLayerTime { mode: j, norm_sq: w });
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param("gamma", "must lie in (0, 1)"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", "must lie in (0, 1)"));
    }
    Ok(2.0 / epsilon.powf(1.0 - gamma / (w - 1) as f64))
}

pub fn ignition_threshold(epsilon: f64, gamma: f64) -> f64 {
    epsilon.powf(gamma) / 4.0
}

/// `alpha (log 1/eps)^theta`, the largest `|j|` a given `eps` can certify.
pub fn spectral_localization_bound(epsilon: f64, alpha: f64, theta: f64) -> Result<f64> {
    if !(theta < 0.25) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    if !(theta > 0.0) {
        return Err(Error::param("theta", "must be positive"));
    }
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", "must be positive"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", "must lie in (0, 1)"));
    }
    Ok(alpha * (1.0 / epsilon).ln().powf(theta))
}

/// Floor under which grid coefficients count as not ignited.
pub fn grid_noise_floor(epsilon: f64) -> f64 {
    1e-13f64.max(10.0 * epsilon * f64::EPSILON)
}

/// Resonant-system series start from exact zeros, so anything nonzero is
/// signal.
pub const EXACT_NOISE_FLOOR: f64 = 0.0;

/// Slow-time interval `[start, end]` for the power-law fits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub start: f64,
    pub end: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { start: 1e-3, end: 1e-2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LawFit {
    Fitted { exponent: f64, coefficient: Complex64 },
    NotIgnited,
}

fn demodulated(u: Complex64, j: ModeIndex, t: f64) -> Complex64 {
    u * Complex64::from_polar(1.0, j.norm_sq() as f64 * t)
}

/// Sample indices nearest to a geometric grid over the window.
fn geometric_samples(series: &ModeSeries, j: ModeIndex, epsilon: f64, window: FitWindow) -> Result<Vec<usize>> {
    if !(window.start > 0.0 && window.end > window.start) {
        return Err(Error::param("window", "need 0 < start < end"));
    }
    let end_fast = window.end / epsilon;
    if series.is_empty() || series.end_time() < end_fast * (1.0 - 1e-12) {
        return Err(Error::SeriesTooShort {
            mode: j,
            end: series.end_time(),
            required: end_fast,
        });
    }
    let octaves = (window.end / window.start).log2();
    let count = (octaves * SAMPLES_PER_OCTAVE).ceil() as usize;
    let mut idx: Vec<usize> = (0..=count)
        .map(|k| {
            let s = window.start * (window.end / window.start).powf(k as f64 / count as f64);
            nearest_index(&series.times, s / epsilon)
        })
        .collect();
    idx.dedup();
    if idx.len() < 3 {
        return Err(Error::param("window", "fewer than 3 distinct samples in the window"));
    }
    Ok(idx)
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    let upper = times.partition_point(|&s| s < t);
    if upper == 0 {
        return 0;
    }
    if upper == times.len() {
        return times.len() - 1;
    }
    if t - times[upper - 1] <= times[upper] - t {
        upper - 1
    } else {
        upper
    }
}

/// Power law `u_j(t) e^{i t |j|^2} ~ c (eps t)^p` over the window.
///
/// `p` is the log-log slope. `c` is the intercept of the straight-line fit
/// `u e^{i t |j|^2} / (eps t)^p = c + d (eps t)`, which absorbs the leading
/// correction to the law.
pub fn amplitude_law_fit(
    series: &ModeSeries,
    j: ModeIndex,
    epsilon: f64,
    window: FitWindow,
    noise_floor: f64,
) -> Result<LawFit> {
    let vals = series.require(j)?;
    let idx = geometric_samples(series, j, epsilon, window)?;
    if idx.iter().any(|&i| vals[i].norm() <= noise_floor) {
        return Ok(LawFit::NotIgnited);
    }
    let s: Vec<f64> = idx.iter().map(|&i| epsilon * series.times[i]).collect();
    let xs: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| vals[i].norm().ln()).collect();
    let exponent = crate::approx::ls_slope(&xs, &ys);

    let ratios: Vec<Complex64> = idx
        .iter()
        .zip(&s)
        .map(|(&i, &sv)| demodulated(vals[i], j, series.times[i]) / sv.powf(exponent))
        .collect();
    let n = s.len() as f64;
    let ms = s.iter().sum::<f64>() / n;
    let mr = ratios.iter().sum::<Complex64>() / n;
    let sxx: f64 = s.iter().map(|v| (v - ms) * (v - ms)).sum();
    let sxr: Complex64 = s.iter().zip(&ratios).map(|(v, r)| (r - mr) * (v - ms)).sum();
    let slope = sxr / sxx;
    Ok(LawFit::Fitted {
        exponent,
        coefficient: mr - slope * ms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotIgnited,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IgnitionVerdict {
    pub mode: ModeIndex,
    pub layer_time: f64,
    pub threshold: f64,
    pub measured: f64,
    /// `measured / threshold`.
    pub margin: f64,
    pub status: Verdict,
}

/// Compares `|u_j|` at the layer time against `eps^gamma / 4`.
pub fn ignition_check(
    series: &ModeSeries,
    j: ModeIndex,
    epsilon: f64,
    gamma: f64,
    noise_floor: f64,
) -> Result<IgnitionVerdict> {
    let lt = layer_time(epsilon, gamma, j)?;
    if extremal_generation(j).is_none() {
        return Err(Error::param("mode", format!("{j} is not an extremal mode")));
    }
    let measured = series.modulus_at(j, lt)?;
    let threshold = ignition_threshold(epsilon, gamma);
    let vals = series.require(j)?;
    let upto = series.times.partition_point(|&t| t <= lt);
    let ignited = vals[..upto.max(1)].iter().any(|v| v.norm() > noise_floor) || measured > noise_floor;
    let status = if !ignited {
        Verdict::NotIgnited
    } else if measured >= threshold {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(IgnitionVerdict {
        mode: j,
        layer_time: lt,
        threshold,
        measured,
        margin: measured / threshold,
        status,
    })
}

/// First fast time at which `|u_j|` reaches `threshold`, linearly
/// interpolated between samples.
pub fn ignition_time(series: &ModeSeries, j: ModeIndex, threshold: f64) -> Result<Option<f64>> {
    let vals = series.require(j)?;
    let first = match vals.iter().position(|v| v.norm() >= threshold) {
        Some(i) => i,
        None => return Ok(None),
    };
    if first == 0 {
        return Ok(Some(series.times[0]));
    }
    let (a0, a1) = (vals[first - 1].norm(), vals[first].norm());
    let (t0, t1) = (series.times[first - 1], series.times[first]);
    Ok(Some(t0 + (threshold - a0) / (a1 - a0) * (t1 - t0)))
}

/// Fitted constants of the envelope `(C0 eps t)^(alpha+1) + C eps`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RemainderFit {
    pub c0: f64,
    pub c: f64,
}

/// `|u_j e^{i t |j|^2} - c(n) (eps t)^alpha(n)|` at every sample of the
/// extremal modes of generation `<= max_generation`, as
/// `(mode, generation, t, residual)`. Modes that never leave the grid noise
/// floor carry no law and are skipped.
fn residuals(
    series: &ModeSeries,
    epsilon: f64,
    lambda: Sign,
    max_generation: u32,
) -> Vec<(ModeIndex, u32, f64, f64)> {
    let mut out = Vec::new();
    for (j, vals) in series.modes.iter().zip(&series.values) {
        let n = match extremal_generation(*j) {
            Some(n) if n <= max_generation => n,
            _ => continue,
        };
        if vals.iter().all(|v| v.norm() <= 1e-13) {
            continue;
        }
        let c = taylor_coefficient(n, lambda);
        let alpha = taylor_exponent(n) as i32;
        for (&t, &u) in series.times.iter().zip(vals) {
            let s = epsilon * t;
            let r = (demodulated(u, *j, t) - c * s.powi(alpha)).norm();
            out.push((*j, n, t, r));
        }
    }
    out
}

/// Smallest `C0` with `residual <= (C0 eps t)^(alpha+1)` on a
/// resonant-system series.
pub fn fit_c0(resonant: &ModeSeries, epsilon: f64, lambda: Sign, max_generation: u32) -> f64 {
    residuals(resonant, epsilon, lambda, max_generation)
        .into_iter()
        .filter(|&(_, _, t, r)| t > 0.0 && r > 0.0)
        .map(|(_, n, t, r)| r.powf(1.0 / (taylor_exponent(n) + 1) as f64) / (epsilon * t))
        .fold(0.0, f64::max)
}

/// `C = max |u_j - v_j| / eps` over the extremal modes of generation
/// `<= max_generation`, with `v` the approximant sampled at the same times
/// as the NLS series `u`. Together with [`fit_c0`] this bounds the residual
/// through `|u - c s^a| <= |u - v| + |v - c s^a|`.
pub fn fit_c(nls: &ModeSeries, approximant: &ModeSeries, epsilon: f64, max_generation: u32) -> Result<f64> {
    if nls.times != approximant.times {
        return Err(Error::param("approximant", "sample times differ from the NLS series"));
    }
    let mut c = 0.0f64;
    for (j, vals) in nls.modes.iter().zip(&nls.values) {
        match extremal_generation(*j) {
            Some(n) if n <= max_generation => {}
            _ => continue,
        }
        let v = approximant.require(*j)?;
        for (u, w) in vals.iter().zip(v) {
            c = c.max((u - w).norm() / epsilon);
        }
    }
    Ok(c)
}

/// `C0` from the resonant series, then `C` from an (NLS, approximant) pair
/// if given.
pub fn remainder_constant_fit(
    resonant: &ModeSeries,
    nls: Option<(&ModeSeries, &ModeSeries)>,
    epsilon: f64,
    lambda: Sign,
    max_generation: u32,
) -> Result<RemainderFit> {
    let c0 = fit_c0(resonant, epsilon, lambda, max_generation);
    let c = match nls {
        Some((u, v)) => fit_c(u, v, epsilon, max_generation)?,
        None => 0.0,
    };
    Ok(RemainderFit { c0, c })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    /// Largest `residual / envelope`.
    pub worst_ratio: f64,
    pub worst_mode: Option<ModeIndex>,
    pub worst_time: f64,
    pub samples: usize,
    pub holds: bool,
}

/// Checks `residual <= (C0 eps t)^(alpha+1) + C eps` at every sample.
pub fn envelope_check(series: &ModeSeries, epsilon: f64, lambda: Sign, max_generation: u32, fit: RemainderFit) -> EnvelopeCheck {
    let mut check = EnvelopeCheck {
        worst_ratio: 0.0,
        worst_mode: None,
        worst_time: 0.0,
        samples: 0,
        holds: true,
    };
    for (j, n, t, r) in residuals(series, epsilon, lambda, max_generation) {
        let env = (fit.c0 * epsilon * t).powi(taylor_exponent(n) as i32 + 1) + fit.c * epsilon;
        check.samples += 1;
        let ratio = if env > 0.0 {
            r / env
        } else if r > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > check.worst_ratio {
            check.worst_ratio = ratio;
            check.worst_mode = Some(j);
            check.worst_time = t;
        }
        if r > env * (1.0 + 1e-12) {
            check.holds = false;
        }
    }
    check
}

/// `max residual / ((eps t)^(alpha+1) + eps)` over the samples.
pub fn consistency_ratio(series: &ModeSeries, epsilon: f64, lambda: Sign, max_generation: u32) -> f64 {
    residuals(series, epsilon, lambda, max_generation)
        .into_iter()
        .map(|(_, n, t, r)| r / ((epsilon * t).powi(taylor_exponent(n) as i32 + 1) + epsilon))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeSettings {
    pub gamma: f64,
    pub theta: f64,
    pub alpha: f64,
    pub window: FitWindow,
    /// Relative tolerance on the exponent (absolute for generation 0).
    pub exponent_tol: f64,
    pub modulus_tol: f64,
    pub phase_tol: f64,
    pub noise_floor: f64,
}

impl Default for CascadeSettings {
    fn default() -> Self {
        CascadeSettings {
            gamma: DEFAULT_GAMMA,
            theta: DEFAULT_THETA,
            alpha: DEFAULT_ALPHA,
            window: FitWindow::default(),
            exponent_tol: 0.05,
            modulus_tol: 0.02,
            phase_tol: 0.05,
            noise_floor: EXACT_NOISE_FLOOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub mode: ModeIndex,
    pub generation: u32,
    pub expected_exponent: u64,
    pub fit: LawFit,
    pub expected_coefficient: Complex64,
    pub layer_time: Option<f64>,
    pub threshold: f64,
    pub ignition_time: Option<f64>,
    pub measured_amplitude: Option<f64>,
    pub margin: Option<f64>,
    pub within_localization: bool,
    pub exponent_pass: bool,
    pub coefficient_pass: bool,
    /// `None` when the series stops before the layer time or `n = 0`.
    pub ignition: Option<Verdict>,
}

impl ModeRecord {
    pub fn passes(&self) -> bool {
        self.exponent_pass && self.coefficient_pass && self.ignition.map_or(true, |v| v == Verdict::Pass)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub epsilon: f64,
    pub gamma: f64,
    pub theta: f64,
    pub alpha: f64,
    pub localization_bound: f64,
    pub remainder: Option<RemainderFit>,
    pub records: Vec<ModeRecord>,
    pub all_pass: bool,
}

fn mode_record(
    series: &ModeSeries,
    j: ModeIndex,
    n: u32,
    epsilon: f64,
    lambda: Sign,
    settings: &CascadeSettings,
    bound: f64,
) -> Result<ModeRecord> {
    let alpha = taylor_exponent(n);
    let expected = taylor_coefficient(n, lambda);
    let fit = amplitude_law_fit(series, j, epsilon, settings.window, settings.noise_floor)?;
    let (exponent_pass, coefficient_pass) = match fit {
        LawFit::Fitted { exponent, coefficient } => {
            let tol = settings.exponent_tol * (alpha.max(1) as f64);
            let q = coefficient / expected;
            (
                (exponent - alpha as f64).abs() <= tol,
                (q.norm() - 1.0).abs() <= settings.modulus_tol && q.arg().abs() <= settings.phase_tol,
            )
        }
        LawFit::NotIgnited => (false, false),
    };
    let threshold = ignition_threshold(epsilon, settings.gamma);
    let mut record = ModeRecord {
        mode: j,
        generation: n,
        expected_exponent: alpha,
        fit,
        expected_coefficient: expected,
        layer_time: None,
        threshold,
        ignition_time: ignition_time(series, j, threshold)?,
        measured_amplitude: None,
        margin: None,
        within_localization: (j.norm_sq() as f64).sqrt() < bound,
        exponent_pass,
        coefficient_pass,
        ignition: None,
    };
    if n >= 1 {
        let lt = layer_time(epsilon, settings.gamma, j)?;
        record.layer_time = Some(lt);
        if series.end_time() >= lt * (1.0 - 1e-12) {
            let v = ignition_check(series, j, epsilon, settings.gamma, settings.noise_floor)?;
            record.measured_amplitude = Some(v.measured);
            record.margin = Some(v.margin);
            record.ignition = Some(v.status);
        }
    }
    Ok(record)
}

/// Per-mode verdicts for every extremal mode in the series.
pub fn cascade_report(
    series: &ModeSeries,
    epsilon: f64,
    lambda: Sign,
    settings: &CascadeSettings,
    remainder: Option<RemainderFit>,
) -> Result<CascadeReport> {
    let bound = spectral_localization_bound(epsilon, settings.alpha, settings.theta)?;
    let modes: Vec<(ModeIndex, u32)> = series
        .modes
        .iter()
        .filter_map(|&j| extremal_generation(j).map(|n| (j, n)))
        .collect();
    let records = modes
        .par_iter()
        .map(|&(j, n)| mode_record(series, j, n, epsilon, lambda, settings, bound))
        .collect::<Result<Vec<_>>>()?;
    let all_pass = !records.is_empty() && records.iter().all(ModeRecord::passes);
    Ok(CascadeReport {
        epsilon,
        gamma: settings.gamma,
        theta: settings.theta,
        alpha: settings.alpha,
        localization_bound: bound,
        remainder,
        records,
        all_pass,
    })
}

impl CascadeReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "eps = {}  gamma = {}  theta = {}  alpha = {}  |j| bound = {:.4}",
            self.epsilon, self.gamma, self.theta, self.alpha, self.localization_bound
        );
        if let Some(r) = self.remainder {
            let _ = writeln!(s, "C0 = {:.6}  C = {:.6}", r.c0, r.c);
        }
        let _ = writeln!(
            s,
            "{:>9} {:>2} {:>5} {:>10} {:>12} {:>12} {:>11} {:>10} {:>11} {:>9} {:>11}",
            "mode", "n", "a(n)", "fit exp", "|c(n)|", "fit |c|", "layer t", "threshold", "measured", "margin", "verdict"
        );
        for r in &self.records {
            let (fe, fc) = match r.fit {
                LawFit::Fitted { exponent, coefficient } => (format!("{exponent:.4}"), format!("{:.6}", coefficient.norm())),
                LawFit::NotIgnited => ("-".into(), "-".into()),
            };
            let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
            let verdict = match (r.fit, r.passes()) {
                (LawFit::NotIgnited, _) => "not ignited",
                (_, true) => "pass",
                (_, false) => "fail",
            };
            let _ = writeln!(
                s,
                "{:>9} {:>2} {:>5} {:>10} {:>12.6} {:>12} {:>11} {:>10.3e} {:>11} {:>9} {:>11}",
                r.mode.to_string(),
                r.generation,
                r.expected_exponent,
                fe,
                r.expected_coefficient.norm(),
                fc,
                opt(r.layer_time, 3),
                r.threshold,
                opt(r.measured_amplitude, 6),
                opt(r.margin, 3),
                verdict
            );
        }
        s
    }
}
