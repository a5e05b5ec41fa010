//! Geometric-optics approximant `v(t) = sum a_j(eps t) e^{i j.x - i t |j|^2}`
//! built from a resonant trajectory, and its Wiener-norm distance to the
//! full NLS solution.

use std::collections::BTreeSet;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ModeIndex;
use crate::resonant::{AmplitudeField, ResonantSystem, Trajectory};
use crate::series::ModeSeries;
use crate::spectral::{self, NlsParams, SpectralGrid, SplitStepSolver, Splitting, Dealias};
use crate::Sign;

/// Grid coefficients below this modulus are treated as round-off.
pub const FFT_NOISE_FLOOR: f64 = 1e-14;

/// Resonant trajectory in slow time plus the scale `eps`.
#[derive(Clone, Debug)]
pub struct ApproximantSpec {
    pub trajectory: Trajectory,
    pub epsilon: f64,
}

impl ApproximantSpec {
    pub fn new(trajectory: Trajectory, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be positive"));
        }
        Ok(ApproximantSpec {
            trajectory,
            epsilon,
        })
    }

    /// Last fast time covered by the trajectory.
    pub fn horizon(&self) -> f64 {
        self.trajectory.end_time() / self.epsilon
    }

    /// Dense `v_j(t)` in trajectory mode order.
    pub fn dense_at(&self, t: f64) -> Result<Vec<Complex64>> {
        let mut a = self.trajectory.interpolate(self.epsilon * t)?;
        for (v, j) in a.iter_mut().zip(&self.trajectory.modes) {
            *v *= Complex64::from_polar(1.0, -(j.norm_sq() as f64) * t);
        }
        Ok(a)
    }
}

/// Coefficients `v_j = a_j(eps t) e^{-i t |j|^2}` at fast time `t`.
pub fn build_v_eps(spec: &ApproximantSpec, t: f64) -> Result<AmplitudeField> {
    let dense = spec.dense_at(t)?;
    AmplitudeField::from_entries(
        spec.trajectory.radius,
        spec.trajectory.modes.iter().copied().zip(dense),
    )
}

pub fn wiener_norm(a: &AmplitudeField) -> f64 {
    a.wiener_norm()
}

/// `sum_j |u_j - v_j|` over the union of supports; `u` is the grid side and
/// its entries below [`FFT_NOISE_FLOOR`] count as zero.
pub fn wiener_error(u_modes: &AmplitudeField, v_modes: &AmplitudeField) -> f64 {
    let keys: BTreeSet<ModeIndex> = u_modes.iter().chain(v_modes.iter()).map(|(j, _)| j).collect();
    keys.into_iter()
        .map(|j| {
            let u = u_modes.get(j);
            let u = if u.norm() < FFT_NOISE_FLOOR { Complex64::default() } else { u };
            (u - v_modes.get(j)).norm()
        })
        .sum()
}

/// Grid-layout version of [`wiener_error`]: `coeffs` in FFT bin layout, `v`
/// dense over `modes`.
fn wiener_error_grid(coeffs: &[Complex64], k: usize, modes: &[ModeIndex], v: &[Complex64]) -> f64 {
    let mut matched = vec![Complex64::default(); coeffs.len()];
    let mut outside = 0.0;
    for (j, &vj) in modes.iter().zip(v) {
        match (spectral::bin(j.j1, k), spectral::bin(j.j2, k)) {
            (Some(a), Some(b)) => matched[a * k + b] = vj,
            _ => outside += vj.norm(),
        }
    }
    let inside: f64 = coeffs
        .iter()
        .zip(&matched)
        .map(|(&u, &v)| {
            let u = if u.norm() < FFT_NOISE_FLOOR { Complex64::default() } else { u };
            (u - v).norm()
        })
        .sum();
    inside + outside
}

/// Wiener distance between the NLS solution and the approximant over time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorReport {
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub wiener_errors: Vec<f64>,
    pub sup_error: f64,
    /// Watched NLS coefficients sampled at the same times.
    #[serde(skip)]
    pub series: ModeSeries,
    /// Watched approximant coefficients `v_j(t)` at the same times.
    #[serde(skip)]
    pub approximant: ModeSeries,
    /// Largest relative mass drift of the NLS run.
    pub mass_drift: f64,
}

impl ErrorReport {
    pub fn fitted_c(&self) -> f64 {
        self.sup_error / self.epsilon
    }

    /// CSV rows `epsilon,t,wiener_error` (no header).
    pub fn write_rows<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (t, e) in self.times.iter().zip(&self.wiener_errors) {
            writeln!(w, "{},{},{}", self.epsilon, t, e)?;
        }
        Ok(())
    }
}

/// Settings shared by every run of a convergence study.
#[derive(Clone, Debug)]
pub struct CompareParams {
    pub datum: AmplitudeField,
    pub lambda: Sign,
    pub grid_k: usize,
    pub tau: f64,
    /// Steps between comparisons.
    pub compare_stride: usize,
    pub resonant_dt: f64,
    pub resonant_radius: i64,
    pub splitting: Splitting,
    pub watch: Vec<ModeIndex>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub reports: Vec<ErrorReport>,
    /// Slope of `log sup_error` against `log eps`.
    pub observed_order: f64,
    /// `sup_error(eps_{i+1}) / sup_error(eps_i)`.
    pub ratios: Vec<f64>,
}

impl ConvergenceStudy {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epsilon,t,wiener_error")?;
        for r in &self.reports {
            r.write_rows(&mut w)?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "runs": self.reports.iter().map(|r| serde_json::json!({
                "epsilon": r.epsilon,
                "sup_error": r.sup_error,
                "fitted_C": r.fitted_c(),
            })).collect::<Vec<_>>(),
            "observed_order": self.observed_order,
        })
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Resonant trajectory for `params` over slow time `[0, slow_horizon]`,
/// snapshotted at every step.
pub fn resonant_reference(params: &CompareParams, slow_horizon: f64) -> Result<Trajectory> {
    let system = ResonantSystem::new(params.resonant_radius, params.lambda);
    let a0 = AmplitudeField::from_entries(params.resonant_radius, params.datum.iter())?;
    system.integrate(&a0, slow_horizon, params.resonant_dt, 1)
}

/// Runs the rescaled NLS (`coupling = eps`) from the datum up to
/// `slow_horizon / eps` and measures its Wiener distance to the approximant.
pub fn compare_run(spec: &ApproximantSpec, params: &CompareParams, slow_horizon: f64) -> Result<ErrorReport> {
    let eps = spec.epsilon;
    let nls = NlsParams {
        lambda: params.lambda,
        coupling: eps,
        tau: params.tau,
        t_final: slow_horizon / eps,
        k: params.grid_k,
        record_stride: params.compare_stride,
        splitting: params.splitting,
        dealias: Dealias::Off,
    };
    let u0 = SpectralGrid::synthesize(params.grid_k, params.datum.iter())?;
    let mut solver = SplitStepSolver::new(&u0, nls.clone())?;
    let t_max = spec.horizon();
    let modes = &spec.trajectory.modes;
    let mut report = ErrorReport {
        epsilon: eps,
        times: Vec::new(),
        wiener_errors: Vec::new(),
        sup_error: 0.0,
        series: ModeSeries::new(params.watch.clone()),
        approximant: ModeSeries::new(params.watch.clone()),
        mass_drift: 0.0,
    };
    let m0 = solver.mass();
    let sample = |s: &SplitStepSolver, report: &mut ErrorReport| -> Result<()> {
        let t = s.time();
        let v = spec.dense_at(t)?;
        let err = wiener_error_grid(s.coefficients(), params.grid_k, modes, &v);
        report.times.push(t);
        report.wiener_errors.push(err);
        report.sup_error = report.sup_error.max(err);
        report.series.push(t, params.watch.iter().map(|&j| s.coefficient(j)));
        report.approximant.push(
            t,
            params.watch.iter().map(|j| spec.trajectory.index_of(*j).map_or(Complex64::default(), |i| v[i])),
        );
        if m0 > 0.0 {
            report.mass_drift = report.mass_drift.max((s.mass() - m0).abs() / m0);
        }
        Ok(())
    };
    sample(&solver, &mut report)?;
    let steps = nls.steps();
    for n in 1..=steps {
        solver.step()?;
        if solver.time() > t_max * (1.0 + 1e-12) {
            break;
        }
        if n % params.compare_stride as u64 == 0 || n == steps {
            sample(&solver, &mut report)?;
        }
    }
    Ok(report)
}

/// Error reports for each `eps` (decreasing) against one shared resonant
/// trajectory on `[0, slow_horizon]`, plus the observed order.
pub fn convergence_study(epsilons: &[f64], slow_horizon: f64, params: &CompareParams) -> Result<ConvergenceStudy> {
    if epsilons.is_empty() {
        return Err(Error::param("epsilons", "at least one value required"));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) || epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::param("epsilons", "must be positive and strictly decreasing"));
    }
    let trajectory = resonant_reference(params, slow_horizon)?;
    let reports = epsilons
        .par_iter()
        .map(|&eps| {
            let spec = ApproximantSpec::new(trajectory.clone(), eps)?;
            compare_run(&spec, params, slow_horizon)
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = reports.iter().map(|r| r.epsilon.ln()).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.sup_error.ln()).collect();
    let observed_order = if reports.len() > 1 { ls_slope(&xs, &ys) } else { f64::NAN };
    let ratios = reports.windows(2).map(|w| w[1].sup_error / w[0].sup_error).collect();
    Ok(ConvergenceStudy {
        reports,
        observed_order,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn wiener_norms() {
        assert_eq!(wiener_norm(&AmplitudeField::five_mode_datum(1)), 5.0);
        assert_eq!(wiener_norm(&AmplitudeField::new(3)), 0.0);
        let f = AmplitudeField::from_entries(1, [(ModeIndex::new(1, 0), c(3.0, 4.0))]).unwrap();
        assert_eq!(wiener_norm(&f), 5.0);
    }

    #[test]
    fn wiener_error_basics() {
        let u = AmplitudeField::five_mode_datum(2);
        assert_eq!(wiener_error(&u, &u), 0.0);
        let mut v = u.clone();
        v.set(ModeIndex::new(0, 1), c(1.0, 0.25)).unwrap();
        assert_eq!(wiener_error(&u, &v), 0.25);
        let mut noisy = u.clone();
        noisy.set(ModeIndex::new(2, 2), c(1e-16, 0.0)).unwrap();
        assert_eq!(wiener_error(&noisy, &u), 0.0);
    }

    #[test]
    fn approximant_at_zero_is_datum() {
        let sys = ResonantSystem::new(3, Sign::Plus);
        let traj = sys.integrate(&AmplitudeField::five_mode_datum(3), 0.1, 1e-3, 1).unwrap();
        let spec = ApproximantSpec::new(traj, 0.05).unwrap();
        let v0 = build_v_eps(&spec, 0.0).unwrap();
        assert_eq!(wiener_error(&v0, &AmplitudeField::five_mode_datum(3)), 0.0);
        assert!(build_v_eps(&spec, 1.5).is_ok());
        assert!(build_v_eps(&spec, 2.5).is_err());
    }

    #[test]
    fn unit_square_approximant_phases() {
        let eps = 0.1;
        let sys = ResonantSystem::new(2, Sign::Plus);
        let traj = sys.integrate(&AmplitudeField::unit_square_datum(2), 0.5, 1e-3, 1).unwrap();
        let spec = ApproximantSpec::new(traj, eps).unwrap();
        let t = 3.7;
        let v = build_v_eps(&spec, t).unwrap();
        assert_eq!(v.support().len(), 4);
        for (j, vj) in v.iter() {
            if j.norm_sq() == 1 {
                assert!((vj.norm() - 1.0).abs() < 1e-9);
                // total phase rate -(|j|^2 + 9 eps) for lambda = +1
                assert!((vj - Complex64::from_polar(1.0, -(1.0 + 9.0 * eps) * t)).norm() < 1e-8);
            } else {
                assert_eq!(vj, Complex64::default());
            }
        }
    }

    #[test]
    fn grid_error_matches_field_error() {
        let k = 8;
        let u = AmplitudeField::five_mode_datum(4);
        let grid = SpectralGrid::synthesize(k, u.iter()).unwrap();
        let modes: Vec<ModeIndex> = crate::lattice::box_modes(4).into_iter().collect();
        let v: Vec<Complex64> = modes
            .iter()
            .map(|&j| if j == ModeIndex::new(4, 4) { c(0.5, 0.0) } else { u.get(j) })
            .collect();
        let e = wiener_error_grid(&grid.coefficients(), k, &modes, &v);
        assert!((e - 0.5).abs() < 1e-13);
    }

    #[test]
    fn slope() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [1.0, 3.0, 5.0];
        assert!((ls_slope(&xs, &ys) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn study_rejects_bad_epsilons() {
        let p = CompareParams {
            datum: AmplitudeField::unit_square_datum(1),
            lambda: Sign::Plus,
            grid_k: 8,
            tau: 1e-2,
            compare_stride: 1,
            resonant_dt: 1e-2,
            resonant_radius: 2,
            splitting: Splitting::Strang,
            watch: vec![],
        };
        assert!(convergence_study(&[0.01, 0.02], 0.1, &p).is_err());
        assert!(convergence_study(&[], 0.1, &p).is_err());
    }
}
