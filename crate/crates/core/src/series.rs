//! Mode time series in fast time, in the physical (rotating) frame.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::ModeIndex;
use crate::resonant::Trajectory;

/// Fourier coefficients `u_j(t)` of a watch list of modes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModeSeries {
    pub times: Vec<f64>,
    pub modes: Vec<ModeIndex>,
    /// `values[mode][sample]`.
    pub values: Vec<Vec<Complex64>>,
}

impl ModeSeries {
    pub fn new(modes: Vec<ModeIndex>) -> Self {
        let values = vec![Vec::new(); modes.len()];
        ModeSeries {
            times: Vec::new(),
            modes,
            values,
        }
    }

    /// Geometric-optics coefficients `a_j(eps t) e^{-i t |j|^2}` sampled at
    /// the trajectory's snapshots, `t = slow / eps`.
    pub fn from_trajectory(traj: &Trajectory, modes: &[ModeIndex], epsilon: f64) -> Self {
        let times: Vec<f64> = traj.times.iter().map(|s| s / epsilon).collect();
        let values = modes
            .iter()
            .map(|&j| {
                let w = j.norm_sq() as f64;
                traj.series(j)
                    .into_iter()
                    .zip(&times)
                    .map(|(a, &t)| a * Complex64::from_polar(1.0, -w * t))
                    .collect()
            })
            .collect();
        ModeSeries {
            times,
            modes: modes.to_vec(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn push(&mut self, t: f64, values: impl IntoIterator<Item = Complex64>) {
        self.times.push(t);
        for (col, v) in self.values.iter_mut().zip(values) {
            col.push(v);
        }
    }

    pub fn get(&self, j: ModeIndex) -> Option<&[Complex64]> {
        self.modes.iter().position(|&m| m == j).map(|i| self.values[i].as_slice())
    }

    pub fn require(&self, j: ModeIndex) -> Result<&[Complex64]> {
        self.get(j).ok_or(Error::MissingMode(j))
    }

    /// `|u_j|` at fast time `t`, linearly interpolated between samples.
    pub fn modulus_at(&self, j: ModeIndex, t: f64) -> Result<f64> {
        let vals = self.require(j)?;
        let end = self.end_time();
        if self.is_empty() || t > end * (1.0 + 1e-12) || t < self.times[0] {
            return Err(Error::SeriesTooShort {
                mode: j,
                end,
                required: t,
            });
        }
        let upper = self.times.partition_point(|&s| s < t);
        if upper == 0 {
            return Ok(vals[0].norm());
        }
        if upper >= self.len() {
            return Ok(vals[self.len() - 1].norm());
        }
        let (t0, t1) = (self.times[upper - 1], self.times[upper]);
        let w = (t - t0) / (t1 - t0);
        Ok((1.0 - w) * vals[upper - 1].norm() + w * vals[upper].norm())
    }

    /// CSV `t,j1,j2,re,im,abs,log10_abs`, one row per sample and mode.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,j1,j2,re,im,abs,log10_abs")?;
        for (s, t) in self.times.iter().enumerate() {
            for (j, col) in self.modes.iter().zip(&self.values) {
                let v = col[s];
                let a = v.norm();
                writeln!(w, "{},{},{},{},{},{},{}", t, j.j1, j.j2, v.re, v.im, a, a.log10())?;
            }
        }
        Ok(())
    }
}
