//! Split-step Fourier pseudo-spectral solver for
//! `i u_t + Laplacian u = lambda * coupling * |u|^2 u` on `[0, 2pi)^2`.
//!
//! The linear flow is applied exactly in Fourier space; the nonlinear flow is
//! the pointwise rotation `u -> exp(-i lambda coupling dt |u|^2) u`. Grid
//! values are stored row-major, `values[i1 * K + i2] = u(2 pi i1 / K, 2 pi i2 / K)`.
//! Frequencies use the signed representative in `[-K/2, K/2)` on each axis.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ModeIndex;
use crate::resonant::{step_count, AmplitudeField};
use crate::series::ModeSeries;
use crate::Sign;

/// Signed frequency of FFT bin `q` on a grid of size `k`.
pub fn frequency(q: usize, k: usize) -> i64 {
    if q < k / 2 {
        q as i64
    } else {
        q as i64 - k as i64
    }
}

/// FFT bin of signed frequency `j` on a grid of size `k`, if representable.
pub fn bin(j: i64, k: usize) -> Option<usize> {
    let half = (k / 2) as i64;
    if j < -half || j >= half {
        None
    } else {
        Some(j.rem_euclid(k as i64) as usize)
    }
}

fn flat_index(j: ModeIndex, k: usize) -> Option<usize> {
    Some(bin(j.j1, k)? * k + bin(j.j2, k)?)
}

/// Unnormalised 2-D FFT by rows, transpose, rows, transpose.
#[derive(Clone)]
pub struct Fft2 {
    k: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
    transposed: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("k", &self.k).finish()
    }
}

impl Fft2 {
    pub fn new(k: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(k);
        let inverse = planner.plan_fft_inverse(k);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Fft2 {
            k,
            forward,
            inverse,
            scratch_len,
            transposed: vec![Complex64::default(); k * k],
        }
    }

    fn rows(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let len = self.scratch_len;
        data.par_chunks_mut(self.k).for_each_init(
            || vec![Complex64::default(); len],
            |scratch, row| plan.process_with_scratch(row, scratch),
        );
    }

    fn transpose(&mut self, data: &mut [Complex64]) {
        let k = self.k;
        let src: &[Complex64] = data;
        self.transposed
            .par_chunks_mut(k)
            .enumerate()
            .for_each(|(r, row)| {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = src[c * k + r];
                }
            });
        data.copy_from_slice(&self.transposed);
    }

    fn run(&mut self, data: &mut [Complex64], forward: bool) {
        assert_eq!(data.len(), self.k * self.k);
        let plan = if forward {
            self.forward.clone()
        } else {
            self.inverse.clone()
        };
        self.rows(data, &plan);
        self.transpose(data);
        self.rows(data, &plan);
        self.transpose(data);
    }

    /// `sum_x u(x) e^{-i j.x}` for every bin.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.run(data, true);
    }

    /// `sum_j c_j e^{i j.x}` at every grid point.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.run(data, false);
    }
}

/// Physical-space samples on the `K x K` collocation grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGrid {
    pub k: usize,
    pub values: Vec<Complex64>,
}

impl SpectralGrid {
    pub fn zeros(k: usize) -> Self {
        SpectralGrid {
            k,
            values: vec![Complex64::default(); k * k],
        }
    }

    /// Samples `f(x1, x2)` at the grid points.
    pub fn from_fn(k: usize, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let h = 2.0 * std::f64::consts::PI / k as f64;
        let values = (0..k * k)
            .map(|i| f((i / k) as f64 * h, (i % k) as f64 * h))
            .collect();
        SpectralGrid { k, values }
    }

    /// Trigonometric polynomial `sum a_j e^{i j.x}` sampled on the grid.
    pub fn synthesize(k: usize, coefficients: impl IntoIterator<Item = (ModeIndex, Complex64)>) -> Result<Self> {
        let mut spec = vec![Complex64::default(); k * k];
        for (j, a) in coefficients {
            let idx = flat_index(j, k).ok_or_else(|| {
                Error::param("datum", format!("mode {j} is not representable on a {k}x{k} grid"))
            })?;
            spec[idx] += a;
        }
        Fft2::new(k).inverse(&mut spec);
        Ok(SpectralGrid { k, values: spec })
    }

    /// Normalised Fourier coefficients in FFT bin layout.
    pub fn coefficients(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        Fft2::new(self.k).forward(&mut data);
        let scale = 1.0 / (self.k * self.k) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
        data
    }

    pub fn scaled(&self, factor: Complex64) -> SpectralGrid {
        SpectralGrid {
            k: self.k,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Discrete L2 mass `(1/K^2) sum |u(x)|^2 = sum |u_j|^2`.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / (self.k * self.k) as f64
    }
}

/// Every discrete Fourier coefficient, keyed by signed mode (`K^2` entries).
pub fn fourier_modes(g: &SpectralGrid) -> AmplitudeField {
    coefficients_to_field(&g.coefficients(), g.k)
}

fn coefficients_to_field(coeffs: &[Complex64], k: usize) -> AmplitudeField {
    let mut field = AmplitudeField::new((k / 2) as i64);
    for (i, &c) in coeffs.iter().enumerate() {
        let j = ModeIndex::new(frequency(i / k, k), frequency(i % k, k));
        field.set(j, c).expect("grid modes lie in the box");
    }
    field
}

fn dispersion(k: usize, dt: f64) -> Vec<Complex64> {
    (0..k * k)
        .map(|i| {
            let j = ModeIndex::new(frequency(i / k, k), frequency(i % k, k));
            Complex64::from_polar(1.0, -(j.norm_sq() as f64) * dt)
        })
        .collect()
}

/// Exact linear flow: `u_j -> e^{-i |j|^2 dt} u_j`.
pub fn linear_step(g: &SpectralGrid, dt: f64) -> SpectralGrid {
    let mut fft = Fft2::new(g.k);
    let mut data = g.values.clone();
    fft.forward(&mut data);
    let scale = 1.0 / (g.k * g.k) as f64;
    for (v, m) in data.iter_mut().zip(dispersion(g.k, dt)) {
        *v *= m * scale;
    }
    fft.inverse(&mut data);
    SpectralGrid { k: g.k, values: data }
}

/// Exact nonlinear flow: `u(x) -> exp(-i lambda coupling dt |u(x)|^2) u(x)`.
pub fn nonlinear_step(g: &SpectralGrid, dt: f64, lambda: Sign, coupling: f64) -> SpectralGrid {
    let mut values = g.values.clone();
    rotate(&mut values, lambda.value() * coupling * dt);
    SpectralGrid { k: g.k, values }
}

/// Applies the nonlinear rotation in place; returns false on a non-finite
/// sample.
fn rotate(values: &mut [Complex64], strength: f64) -> bool {
    apply_pointwise(values, |v, d| *v += d, strength)
}

/// Replaces every sample by its rotation increment `u (e^{-i theta} - 1)`.
fn rotation_increment(values: &mut [Complex64], strength: f64) -> bool {
    apply_pointwise(values, |v, d| *v = d, strength)
}

fn apply_pointwise(
    values: &mut [Complex64],
    apply: impl Fn(&mut Complex64, Complex64) + Sync,
    strength: f64,
) -> bool {
    values
        .par_chunks_mut(1024)
        .map(|chunk| {
            let mut finite = true;
            for v in chunk {
                let a = v.norm_sqr();
                finite &= a.is_finite();
                // e^{-i theta} - 1 in a form that keeps full relative precision
                let theta = strength * a;
                let h = (0.5 * theta).sin();
                let d = *v * Complex64::new(-2.0 * h * h, -theta.sin());
                apply(v, d);
            }
            finite
        })
        .reduce(|| true, |a, b| a && b)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    #[default]
    Strang,
    Lie,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dealias {
    #[default]
    Off,
    TwoThirds,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NlsParams {
    pub lambda: Sign,
    /// Weight of the nonlinearity: `eps` in the rescaled form, `1` when the
    /// datum carries the small amplitude.
    pub coupling: f64,
    pub tau: f64,
    pub t_final: f64,
    pub k: usize,
    pub record_stride: usize,
    pub splitting: Splitting,
    pub dealias: Dealias,
}

impl NlsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::param("tau", "must be positive"));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::param("t_final", "must be non-negative"));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(Error::param("coupling", "must be positive"));
        }
        if self.k < 4 || self.k % 2 != 0 {
            return Err(Error::param("grid_k", "must be even and at least 4"));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        if self.t_final == 0.0 {
            0
        } else {
            step_count(self.t_final, self.tau)
        }
    }
}

/// Time stepper. The state is kept in the interaction picture
/// `w_j = e^{i |j|^2 t} u_j`, so the linear flow is applied through phases
/// evaluated afresh at each step rather than by repeated multiplication;
/// the latter would feed the same rounding of `|e^{-i |j|^2 dt}|` back every
/// step and make the mass drift linearly.
#[derive(Debug)]
pub struct SplitStepSolver {
    params: NlsParams,
    fft: Fft2,
    interaction: Vec<Complex64>,
    coeffs: Vec<Complex64>,
    work: Vec<Complex64>,
    phase: Vec<Complex64>,
    omega: Vec<f64>,
    keep: Option<Vec<bool>>,
    step: u64,
}

impl SplitStepSolver {
    pub fn new(u0: &SpectralGrid, params: NlsParams) -> Result<Self> {
        params.validate()?;
        if u0.k != params.k {
            return Err(Error::param("grid_k", format!("datum has K = {}, params K = {}", u0.k, params.k)));
        }
        let k = params.k;
        let coeffs = u0.coefficients();
        let keep = match params.dealias {
            Dealias::Off => None,
            Dealias::TwoThirds => {
                let cut = (k / 3) as i64;
                Some(
                    (0..k * k)
                        .map(|i| frequency(i / k, k).abs() <= cut && frequency(i % k, k).abs() <= cut)
                        .collect(),
                )
            }
        };
        let omega = (0..k * k)
            .map(|i| ModeIndex::new(frequency(i / k, k), frequency(i % k, k)).norm_sq() as f64)
            .collect();
        Ok(SplitStepSolver {
            fft: Fft2::new(k),
            interaction: coeffs.clone(),
            coeffs,
            work: vec![Complex64::default(); k * k],
            phase: vec![Complex64::default(); k * k],
            omega,
            keep,
            step: 0,
            params,
        })
    }

    pub fn params(&self) -> &NlsParams {
        &self.params
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.params.tau
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Normalised Fourier coefficients in bin layout.
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficient(&self, j: ModeIndex) -> Complex64 {
        flat_index(j, self.params.k).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    pub fn modes(&self) -> AmplitudeField {
        coefficients_to_field(&self.coeffs, self.params.k)
    }

    /// Discrete mass, summed from the interaction-picture coefficients, which
    /// have the same moduli as the Fourier coefficients.
    pub fn mass(&self) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for v in &self.interaction {
            let x = v.norm_sqr();
            let t = sum + x;
            comp += if sum.abs() >= x { (sum - t) + x } else { (x - t) + sum };
            sum = t;
        }
        sum + comp
    }

    pub fn grid(&self) -> SpectralGrid {
        let mut data = self.coeffs.clone();
        let mut fft = self.fft.clone();
        fft.inverse(&mut data);
        SpectralGrid {
            k: self.params.k,
            values: data,
        }
    }

    /// `phase_j = e^{-i |j|^2 t}`.
    fn set_phase(&mut self, t: f64) {
        self.phase
            .par_iter_mut()
            .zip(self.omega.par_iter())
            .for_each(|(p, &w)| *p = Complex64::from_polar(1.0, -w * t));
    }

    /// One step of size `tau`: linear flow to the nonlinear evaluation time
    /// (mid-step for Strang, end of step for Lie), nonlinear flow there,
    /// then back to the interaction picture.
    ///
    /// The nonlinear flow is added as an increment. The stored state then
    /// never passes through the transforms itself, so their rounding scales
    /// with the increment and the discrete mass does not pick up a per-step
    /// bias.
    pub fn step(&mut self) -> Result<()> {
        let k = self.params.k;
        let tau = self.params.tau;
        let n = self.step as f64;
        let t_eval = match self.params.splitting {
            Splitting::Strang => (n + 0.5) * tau,
            Splitting::Lie => (n + 1.0) * tau,
        };
        self.set_phase(t_eval);
        self.work
            .par_iter_mut()
            .zip(self.interaction.par_iter().zip(self.phase.par_iter()))
            .for_each(|(w, (a, p))| *w = a * p);
        self.fft.inverse(&mut self.work);
        let strength = self.params.lambda.value() * self.params.coupling * tau;
        if !rotation_increment(&mut self.work, strength) {
            return Err(Error::BlowUp {
                time: self.time(),
                step: self.step,
            });
        }
        self.fft.forward(&mut self.work);
        let scale = 1.0 / (k * k) as f64;
        let update = |a: &mut Complex64, d: &Complex64, p: &Complex64| *a += d * scale * p.conj();
        match &self.keep {
            None => self
                .interaction
                .par_iter_mut()
                .zip(self.work.par_iter().zip(self.phase.par_iter()))
                .for_each(|(a, (d, p))| update(a, d, p)),
            Some(keep) => self
                .interaction
                .par_iter_mut()
                .zip(self.work.par_iter().zip(self.phase.par_iter()))
                .zip(keep.par_iter())
                .for_each(|((a, (d, p)), &kept)| {
                    if kept {
                        update(a, d, p)
                    } else {
                        *a = Complex64::default()
                    }
                }),
        }
        self.step += 1;
        if self.params.splitting == Splitting::Strang {
            self.set_phase((n + 1.0) * tau);
        }
        self.coeffs
            .par_iter_mut()
            .zip(self.interaction.par_iter().zip(self.phase.par_iter()))
            .for_each(|(c, (a, p))| *c = a * p);
        Ok(())
    }
}

/// Output of [`evolve`].
#[derive(Clone, Debug)]
pub struct NlsRun {
    pub series: ModeSeries,
    /// Discrete mass at every recorded sample.
    pub mass: Vec<f64>,
    pub final_grid: SpectralGrid,
}

impl NlsRun {
    /// `max |mass(t) - mass(0)| / mass(0)` over the samples.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        if m0 == 0.0 {
            return 0.0;
        }
        self.mass.iter().map(|m| (m - m0).abs() / m0).fold(0.0, f64::max)
    }
}

/// Advances `u0` for `ceil(t_final / tau)` steps, recording the watched
/// modes every `record_stride` steps and at the end.
pub fn evolve(u0: &SpectralGrid, params: &NlsParams, watch: &[ModeIndex]) -> Result<NlsRun> {
    let mut solver = SplitStepSolver::new(u0, params.clone())?;
    let mut series = ModeSeries::new(watch.to_vec());
    let mut mass = Vec::new();
    let record = |s: &SplitStepSolver, series: &mut ModeSeries, mass: &mut Vec<f64>| {
        series.push(s.time(), watch.iter().map(|&j| s.coefficient(j)));
        mass.push(s.mass());
    };
    record(&solver, &mut series, &mut mass);
    let steps = params.steps();
    for n in 1..=steps {
        solver.step()?;
        if n % params.record_stride as u64 == 0 || n == steps {
            record(&solver, &mut series, &mut mass);
            if !mass.last().is_some_and(|m| m.is_finite()) {
                return Err(Error::BlowUp { time: solver.time(), step: n });
            }
        }
    }
    Ok(NlsRun {
        series,
        mass,
        final_grid: solver.grid(),
    })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"NLSCKPT\0";
const CHECKPOINT_VERSION: u32 = 1;

/// Binary checkpoint: magic `NLSCKPT\0`, `u32` version, `u32` K, `f64` time,
/// 32-byte parameter hash, then `K*K` pairs of `f64` (re, im) in row-major
/// grid order. All little-endian.
pub fn write_checkpoint<W: Write>(mut w: W, grid: &SpectralGrid, t: f64, params_hash: &[u8; 32]) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.k as u32).to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    w.write_all(params_hash)?;
    for v in &grid.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(SpectralGrid, f64, [u8; 32])> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    r.read_exact(&mut b4)?;
    let k = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let t = f64::from_le_bytes(b8);
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    let mut values = Vec::with_capacity(k * k);
    for _ in 0..k * k {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        values.push(Complex64::new(re, f64::from_le_bytes(b8)));
    }
    Ok((SpectralGrid { k, values }, t, hash))
}
