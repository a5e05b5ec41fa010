//! The resonant amplitude system
//! `i da_j/dt = lambda * sum_{(k,l,m) in I_j} a_k conj(a_l) a_m`
//! on a finite truncation box, integrated in the slow time `t = eps * t_fast`.

mod taylor;

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{box_modes, enumerate_resonances, ModeIndex, ModeSet, ResonantTriple};
use crate::Sign;

pub use taylor::{
    taylor_coefficient, taylor_coefficient_closed_form, taylor_coefficient_exact,
    taylor_exponent, ExactCoefficient, TaylorLaw,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Sparse amplitudes confined to the box `max(|j1|, |j2|) <= truncation_radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeField {
    amplitudes: BTreeMap<ModeIndex, Complex64>,
    truncation_radius: i64,
}

impl AmplitudeField {
    pub fn new(truncation_radius: i64) -> Self {
        AmplitudeField {
            amplitudes: BTreeMap::new(),
            truncation_radius,
        }
    }

    pub fn from_entries<I>(truncation_radius: i64, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ModeIndex, Complex64)>,
    {
        let mut field = AmplitudeField::new(truncation_radius);
        for (j, a) in entries {
            field.set(j, a)?;
        }
        Ok(field)
    }

    /// `1 + 2cos x1 + 2cos x2`: unit amplitude on the five-mode set.
    pub fn five_mode_datum(truncation_radius: i64) -> Self {
        Self::unit_on(truncation_radius, &crate::lattice::five_mode_set())
    }

    /// `2cos x1 + 2cos x2`: unit amplitude on the four modes with `|j| = 1`.
    pub fn unit_square_datum(truncation_radius: i64) -> Self {
        Self::unit_on(truncation_radius, &crate::lattice::unit_square_set())
    }

    fn unit_on(truncation_radius: i64, set: &ModeSet) -> Self {
        AmplitudeField::from_entries(
            truncation_radius,
            set.iter().map(|&j| (j, Complex64::new(1.0, 0.0))),
        )
        .expect("truncation radius must contain the unit modes")
    }

    pub fn truncation_radius(&self) -> i64 {
        self.truncation_radius
    }

    pub fn set(&mut self, j: ModeIndex, a: Complex64) -> Result<()> {
        if j.max_norm() > self.truncation_radius {
            return Err(Error::OutsideTruncation {
                mode: j,
                radius: self.truncation_radius,
            });
        }
        self.amplitudes.insert(j, a);
        Ok(())
    }

    pub fn get(&self, j: ModeIndex) -> Complex64 {
        self.amplitudes.get(&j).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeIndex, Complex64)> + '_ {
        self.amplitudes.iter().map(|(&j, &a)| (j, a))
    }

    /// Modes with a nonzero amplitude.
    pub fn support(&self) -> ModeSet {
        self.iter().filter(|(_, a)| *a != Complex64::default()).map(|(j, _)| j).collect()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Wiener norm `sum |a_j|`.
    pub fn wiener_norm(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm()).sum()
    }

    pub fn mass(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: Complex64) -> AmplitudeField {
        AmplitudeField {
            amplitudes: self.amplitudes.iter().map(|(&j, &a)| (j, a * factor)).collect(),
            truncation_radius: self.truncation_radius,
        }
    }
}

/// Mass, quadratic energy `sum |j|^2 |a_j|^2`, and the resonant quartic
/// Hamiltonian `(lambda/2) Re sum a_k a_m conj(a_l) conj(a_j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Conserved {
    pub mass: f64,
    pub h0: f64,
    pub z: f64,
}

/// Neumaier-compensated sum in iteration order.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Conserved quantities computed from the support of `a` alone.
pub fn conserved_quantities(a: &AmplitudeField, lambda: Sign) -> Conserved {
    let support = a.support();
    let mass = compensated_sum(support.iter().map(|&j| a.get(j).norm_sqr()));
    let h0 = compensated_sum(support.iter().map(|&j| j.norm_sq() as f64 * a.get(j).norm_sqr()));
    let mut quartic = Complex64::default();
    for &j in &support {
        for t in enumerate_resonances(j, &support) {
            quartic += a.get(t.k) * a.get(t.m) * a.get(t.l).conj() * a.get(j).conj();
        }
    }
    Conserved {
        mass,
        h0,
        z: 0.5 * lambda.value() * quartic.re,
    }
}

/// Precomputed resonance tables for a truncation box.
///
/// Degenerate triples are folded into `2M a_j - |a_j|^2 a_j` with
/// `M = sum |a_l|^2`; only non-degenerate rectangles are stored. Each
/// target's rectangles are ordered canonically under the symmetry group of
/// the square, so dihedrally related modes accumulate identical sums.
#[derive(Clone, Debug)]
pub struct ResonantSystem {
    lambda: Sign,
    radius: i64,
    modes: Vec<ModeIndex>,
    rects: Vec<Vec<[u32; 3]>>,
    ring: Vec<ModeIndex>,
    ring_rects: Vec<Vec<[u32; 3]>>,
    leak_tolerance: Option<f64>,
}

/// Default bound on the forcing of modes just outside the box.
pub const DEFAULT_LEAK_TOLERANCE: f64 = 1e-6;

/// Box radius covering generation `n_max`: `2^ceil((n_max+1)/2)` plus a
/// safety ring.
pub fn default_truncation_radius(n_max: u32) -> i64 {
    (1i64 << ((n_max + 2) / 2)) + 1
}

fn canonical_map(j: ModeIndex) -> (u8, Vec<u8>) {
    let a = j.j1.abs().max(j.j2.abs());
    let b = j.j1.abs().min(j.j2.abs());
    let rep = ModeIndex::new(a, b);
    let g = (0..8u8).find(|&g| j.dihedral(g) == rep).expect("orbit reaches its representative");
    let stab = (0..8u8).filter(|&t| rep.dihedral(t) == rep).collect();
    (g, stab)
}

fn symmetric_order(j: ModeIndex, triples: &mut [ResonantTriple]) {
    let (g, stab) = canonical_map(j);
    let key = |t: &ResonantTriple| {
        let base = t.dihedral(g);
        stab.iter().map(|&s| base.dihedral(s)).min().expect("stabiliser contains identity")
    };
    triples.sort_by_cached_key(|t| (key(t), *t));
}

impl ResonantSystem {
    pub fn new(radius: i64, lambda: Sign) -> Self {
        assert!(radius >= 0, "truncation radius must be non-negative");
        let support = box_modes(radius);
        let modes: Vec<ModeIndex> = support.iter().copied().collect();
        let side = 2 * radius + 1;
        let index = |j: ModeIndex| ((j.j1 + radius) * side + (j.j2 + radius)) as u32;
        let table = |j: ModeIndex| {
            let mut rect: Vec<ResonantTriple> = enumerate_resonances(j, &support)
                .into_iter()
                .filter(|t| !t.is_degenerate())
                .collect();
            symmetric_order(j, &mut rect);
            rect.iter()
                .map(|t| [index(t.k), index(t.l), index(t.m)])
                .collect::<Vec<_>>()
        };
        let rects = modes.par_iter().map(|&j| table(j)).collect();
        let ring: Vec<ModeIndex> = box_modes(radius + 1)
            .into_iter()
            .filter(|j| j.max_norm() == radius + 1)
            .collect();
        let ring_rects = ring.par_iter().map(|&j| table(j)).collect();
        ResonantSystem {
            lambda,
            radius,
            modes,
            rects,
            ring,
            ring_rects,
            leak_tolerance: Some(DEFAULT_LEAK_TOLERANCE),
        }
    }

    /// `None` disables leak detection.
    pub fn with_leak_tolerance(mut self, tol: Option<f64>) -> Self {
        self.leak_tolerance = tol;
        self
    }

    pub fn lambda(&self) -> Sign {
        self.lambda
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    /// Box modes in lexicographic order; the layout of dense states.
    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn index_of(&self, j: ModeIndex) -> Option<usize> {
        if j.max_norm() > self.radius {
            return None;
        }
        let side = 2 * self.radius + 1;
        Some(((j.j1 + self.radius) * side + (j.j2 + self.radius)) as usize)
    }

    pub fn rectangle_count(&self) -> usize {
        self.rects.iter().map(Vec::len).sum()
    }

    pub fn dense(&self, a: &AmplitudeField) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::default(); self.modes.len()];
        for (j, v) in a.iter() {
            let idx = self.index_of(j).ok_or(Error::OutsideTruncation {
                mode: j,
                radius: self.radius,
            })?;
            out[idx] = v;
        }
        Ok(out)
    }

    pub fn field(&self, dense: &[Complex64]) -> AmplitudeField {
        AmplitudeField {
            amplitudes: self.modes.iter().copied().zip(dense.iter().copied()).collect(),
            truncation_radius: self.radius,
        }
    }

    fn rect_sum(a: &[Complex64], rects: &[[u32; 3]]) -> Complex64 {
        rects.iter().fold(Complex64::default(), |acc, &[k, l, m]| {
            acc + a[k as usize] * a[l as usize].conj() * a[m as usize]
        })
    }

    fn mass_of(a: &[Complex64]) -> f64 {
        compensated_sum(a.iter().map(|v| v.norm_sqr()))
    }

    /// Resonant sum `sum_{I_j} a_k conj(a_l) a_m` for every box mode.
    pub fn forcing(&self, a: &[Complex64], out: &mut [Complex64]) {
        let mass2 = 2.0 * Self::mass_of(a);
        out.par_iter_mut()
            .zip(self.rects.par_iter())
            .zip(a.par_iter())
            .for_each(|((o, rects), &aj)| {
                *o = aj * (mass2 - aj.norm_sqr()) + Self::rect_sum(a, rects);
            });
    }

    /// Largest forcing on the ring just outside the box.
    pub fn leak(&self, a: &[Complex64]) -> (ModeIndex, f64) {
        self.ring
            .iter()
            .zip(&self.ring_rects)
            .map(|(&j, rects)| (j, Self::rect_sum(a, rects).norm()))
            .fold((ModeIndex::ZERO, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    /// `da/dt = -i lambda * forcing`, after the leak check.
    pub fn rhs_dense(&self, a: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if let Some(tol) = self.leak_tolerance {
            let (mode, forcing) = self.leak(a);
            if forcing > tol {
                return Err(Error::TruncationLeak { mode, forcing });
            }
        }
        self.forcing(a, out);
        let factor = -I * self.lambda.value();
        out.par_iter_mut().for_each(|o| *o *= factor);
        Ok(())
    }

    pub fn rhs(&self, a: &AmplitudeField) -> Result<AmplitudeField> {
        let dense = self.dense(a)?;
        let mut out = vec![Complex64::default(); dense.len()];
        self.rhs_dense(&dense, &mut out)?;
        Ok(self.field(&out))
    }

    pub fn conserved(&self, a: &[Complex64]) -> Conserved {
        let mut f = vec![Complex64::default(); a.len()];
        self.forcing(a, &mut f);
        let quartic = a.iter().zip(&f).fold(Complex64::default(), |acc, (aj, fj)| acc + aj.conj() * fj);
        Conserved {
            mass: Self::mass_of(a),
            h0: compensated_sum(
                self.modes.iter().zip(a).map(|(j, v)| j.norm_sq() as f64 * v.norm_sqr()),
            ),
            z: 0.5 * self.lambda.value() * quartic.re,
        }
    }

    /// Fixed-step classical RK4 from `a0` over `[0, horizon]`, recording every
    /// `stride` steps and the final step. Aborts if the l1 norm exceeds ten
    /// times its initial value.
    pub fn integrate(
        &self,
        a0: &AmplitudeField,
        horizon: f64,
        dt: f64,
        stride: usize,
    ) -> Result<Trajectory> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", format!("must be positive, got {horizon}")));
        }
        if stride == 0 {
            return Err(Error::param("stride", "must be at least 1"));
        }
        let steps = step_count(horizon, dt);
        let mut a = self.dense(a0)?;
        let l1_0: f64 = a.iter().map(|v| v.norm()).sum();
        let limit = 10.0 * l1_0;
        let n = a.len();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
            vec![Complex64::default(); n],
            vec![Complex64::default(); n],
            vec![Complex64::default(); n],
            vec![Complex64::default(); n],
            vec![Complex64::default(); n],
        );
        let mut traj = Trajectory {
            times: vec![0.0],
            states: vec![a.clone()],
            modes: self.modes.clone(),
            radius: self.radius,
        };
        let half = 0.5 * dt;
        let sixth = dt / 6.0;
        for step in 1..=steps {
            self.rhs_dense(&a, &mut k1)?;
            axpy(&mut tmp, &a, half, &k1);
            self.rhs_dense(&tmp, &mut k2)?;
            axpy(&mut tmp, &a, half, &k2);
            self.rhs_dense(&tmp, &mut k3)?;
            axpy(&mut tmp, &a, dt, &k3);
            self.rhs_dense(&tmp, &mut k4)?;
            a.par_iter_mut().enumerate().for_each(|(i, v)| {
                *v += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * sixth;
            });
            let t = step as f64 * dt;
            let l1: f64 = a.iter().map(|v| v.norm()).sum();
            if l1_0 > 0.0 && !(l1 <= limit) {
                return Err(Error::Divergence {
                    norm: l1,
                    limit,
                    time: t,
                });
            }
            if step % stride as u64 == 0 || step == steps {
                traj.times.push(t);
                traj.states.push(a.clone());
            }
        }
        Ok(traj)
    }
}

fn axpy(out: &mut [Complex64], x: &[Complex64], h: f64, k: &[Complex64]) {
    out.par_iter_mut()
        .zip(x.par_iter().zip(k.par_iter()))
        .for_each(|(o, (&xi, &ki))| *o = xi + ki * h);
}

/// Number of fixed steps of size `dt` covering `horizon`; exact ratios within
/// round-off are not rounded up.
pub(crate) fn step_count(horizon: f64, dt: f64) -> u64 {
    let ratio = horizon / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as u64
    } else {
        ratio.ceil() as u64
    }
}

/// Dense snapshots of an RK4 run, indexed by slow time.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub modes: Vec<ModeIndex>,
    pub radius: i64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn index_of(&self, j: ModeIndex) -> Option<usize> {
        self.modes.binary_search(&j).ok()
    }

    pub fn state(&self, i: usize) -> AmplitudeField {
        AmplitudeField {
            amplitudes: self.modes.iter().copied().zip(self.states[i].iter().copied()).collect(),
            truncation_radius: self.radius,
        }
    }

    /// Amplitude history of one mode (zeros if outside the box).
    pub fn series(&self, j: ModeIndex) -> Vec<Complex64> {
        match self.index_of(j) {
            Some(idx) => self.states.iter().map(|s| s[idx]).collect(),
            None => vec![Complex64::default(); self.len()],
        }
    }

    /// Four-point Lagrange interpolation of the full state at slow time `t`.
    pub fn interpolate(&self, t: f64) -> Result<Vec<Complex64>> {
        let start = self.times[0];
        let end = self.end_time();
        let slack = 1e-12 * end.abs().max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::OutOfRange { time: t, start, end });
        }
        let t = t.clamp(start, end);
        let n = self.len();
        if n == 1 {
            return Ok(self.states[0].clone());
        }
        let upper = self.times.partition_point(|&s| s <= t).clamp(1, n - 1);
        let i = upper - 1;
        if self.times[i] == t {
            return Ok(self.states[i].clone());
        }
        if n < 4 {
            let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
            return Ok(self.states[i]
                .iter()
                .zip(&self.states[i + 1])
                .map(|(a, b)| a * (1.0 - w) + b * w)
                .collect());
        }
        let first = i.saturating_sub(1).min(n - 4);
        let nodes = &self.times[first..first + 4];
        let weights: Vec<f64> = (0..4)
            .map(|p| {
                (0..4)
                    .filter(|&q| q != p)
                    .map(|q| (t - nodes[q]) / (nodes[p] - nodes[q]))
                    .product()
            })
            .collect();
        let mut out = vec![Complex64::default(); self.modes.len()];
        for (p, w) in weights.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(&self.states[first + p]) {
                *o += v * *w;
            }
        }
        Ok(out)
    }

    /// CSV `t,j1,j2,re,im,abs`, one row per snapshot and listed mode.
    pub fn write_csv<W: Write>(&self, mut w: W, modes: &[ModeIndex], stride: usize) -> std::io::Result<()> {
        writeln!(w, "t,j1,j2,re,im,abs")?;
        let stride = stride.max(1);
        for (s, (&t, state)) in self.times.iter().zip(&self.states).enumerate() {
            if s % stride != 0 && s + 1 != self.len() {
                continue;
            }
            for &j in modes {
                let v = self.index_of(j).map(|i| state[i]).unwrap_or_default();
                writeln!(w, "{},{},{},{},{},{}", t, j.j1, j.j2, v.re, v.im, v.norm())?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{five_mode_set, unit_square_set};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // Direct summation over every triple of I_j inside the box.
    fn direct_rhs(a: &AmplitudeField, lambda: Sign) -> BTreeMap<ModeIndex, Complex64> {
        let support = box_modes(a.truncation_radius());
        support
            .iter()
            .map(|&j| {
                let s = enumerate_resonances(j, &support)
                    .iter()
                    .fold(Complex64::default(), |acc, t| {
                        acc + a.get(t.k) * a.get(t.l).conj() * a.get(t.m)
                    });
                (j, -I * lambda.value() * s)
            })
            .collect()
    }

    #[test]
    fn rhs_single_zero_mode() {
        let sys = ResonantSystem::new(1, Sign::Plus);
        let a = AmplitudeField::from_entries(1, [(ModeIndex::ZERO, c(1.0, 0.0))]).unwrap();
        let d = sys.rhs(&a).unwrap();
        assert_eq!(d.get(ModeIndex::ZERO), c(0.0, -1.0));
        assert!(d.iter().filter(|(j, _)| *j != ModeIndex::ZERO).all(|(_, v)| v.norm() == 0.0));
    }

    #[test]
    fn rhs_unit_square_rate_nine() {
        let sys = ResonantSystem::new(2, Sign::Plus);
        let a = AmplitudeField::unit_square_datum(2);
        let d = sys.rhs(&a).unwrap();
        for j in unit_square_set() {
            assert_eq!(d.get(j), c(0.0, -9.0));
        }
        for (j, v) in d.iter() {
            if !unit_square_set().contains(&j) {
                assert_eq!(v, Complex64::default(), "{j}");
            }
        }
    }

    #[test]
    fn rhs_zero_field() {
        let sys = ResonantSystem::new(2, Sign::Minus);
        let d = sys.rhs(&AmplitudeField::new(2)).unwrap();
        assert!(d.iter().all(|(_, v)| v == Complex64::default()));
    }

    #[test]
    fn rhs_matches_direct_summation() {
        let sys = ResonantSystem::new(3, Sign::Minus).with_leak_tolerance(None);
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = AmplitudeField::from_entries(
            3,
            box_modes(3).into_iter().map(|j| (j, c(next(), next()))),
        )
        .unwrap();
        let fast = sys.rhs(&a).unwrap();
        let direct = direct_rhs(&a, Sign::Minus);
        for (j, v) in fast.iter() {
            let w = direct[&j];
            assert!((v - w).norm() <= 1e-13 * w.norm().max(1.0), "{j}: {v} vs {w}");
        }
    }

    #[test]
    fn leak_is_detected() {
        let sys = ResonantSystem::new(1, Sign::Plus);
        let a = AmplitudeField::from_entries(
            1,
            box_modes(1).into_iter().map(|j| (j, c(1.0, 0.0))),
        )
        .unwrap();
        assert!(matches!(sys.rhs(&a), Err(Error::TruncationLeak { .. })));
        let quiet = sys.clone().with_leak_tolerance(None);
        assert!(quiet.rhs(&a).is_ok());
    }

    #[test]
    fn field_rejects_modes_outside_box() {
        let mut f = AmplitudeField::new(2);
        assert!(f.set(ModeIndex::new(3, 0), c(1.0, 0.0)).is_err());
        assert!(f.set(ModeIndex::new(2, -2), c(1.0, 0.0)).is_ok());
    }

    #[test]
    fn conserved_values() {
        let one = AmplitudeField::from_entries(1, [(ModeIndex::ZERO, c(1.0, 0.0))]).unwrap();
        let q = conserved_quantities(&one, Sign::Plus);
        assert_eq!((q.mass, q.h0), (1.0, 0.0));

        // Hand count: F_0 = 9 and F_j = 11 on the four unit modes, so
        // z = (1/2) (9 + 4 * 11).
        let five = AmplitudeField::five_mode_datum(2);
        for lambda in [Sign::Plus, Sign::Minus] {
            let q = conserved_quantities(&five, lambda);
            assert_eq!((q.mass, q.h0), (5.0, 4.0));
            assert!((q.z - 26.5 * lambda.value()).abs() < 1e-12);
            let sys = ResonantSystem::new(2, lambda);
            let qs = sys.conserved(&sys.dense(&five).unwrap());
            assert_eq!((qs.mass, qs.h0), (5.0, 4.0));
            assert!((qs.z - q.z).abs() < 1e-12);
        }

        let zero = conserved_quantities(&AmplitudeField::new(3), Sign::Plus);
        assert_eq!((zero.mass, zero.h0, zero.z), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zero_datum_stays_zero() {
        let sys = ResonantSystem::new(2, Sign::Plus);
        let traj = sys.integrate(&AmplitudeField::new(2), 0.1, 1e-3, 10).unwrap();
        assert!(traj.states.iter().all(|s| s.iter().all(|v| *v == Complex64::default())));
    }

    #[test]
    fn unit_square_rotates_at_rate_nine() {
        let sys = ResonantSystem::new(2, Sign::Plus);
        let traj = sys.integrate(&AmplitudeField::unit_square_datum(2), 1.0, 1e-3, 100).unwrap();
        let last = traj.state(traj.len() - 1);
        for j in unit_square_set() {
            let v = last.get(j);
            assert!((v.norm() - 1.0).abs() < 1e-10);
            // exp(-9 i lambda t) with lambda = +1
            assert!((v - Complex64::from_polar(1.0, -9.0)).norm() < 1e-8);
        }
        assert_eq!(last.support(), unit_square_set());
    }

    #[test]
    fn diagonal_mode_starts_linearly() {
        for lambda in [Sign::Plus, Sign::Minus] {
            let sys = ResonantSystem::new(3, lambda);
            let h = 1e-4;
            let traj = sys.integrate(&AmplitudeField::five_mode_datum(3), h, h, 1).unwrap();
            let v = traj.state(1).get(ModeIndex::new(1, 1));
            let expected = c(0.0, -2.0 * lambda.value()) * h;
            assert!((v - expected).norm() < 50.0 * h * h, "{v} vs {expected}");
        }
    }

    #[test]
    fn symmetric_modes_are_bitwise_equal() {
        let sys = ResonantSystem::new(5, Sign::Plus);
        let traj = sys.integrate(&AmplitudeField::five_mode_datum(5), 0.05, 1e-3, 10).unwrap();
        let last = traj.state(traj.len() - 1);
        for j in box_modes(5) {
            let v = last.get(j);
            for g in 0..8 {
                assert_eq!(v, last.get(j.dihedral(g)), "{j} under {g}");
            }
        }
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_accurate_between() {
        let sys = ResonantSystem::new(2, Sign::Plus);
        let traj = sys.integrate(&AmplitudeField::unit_square_datum(2), 0.5, 1e-3, 1).unwrap();
        let idx = traj.index_of(ModeIndex::new(1, 0)).unwrap();
        let at = traj.interpolate(traj.times[7]).unwrap();
        assert_eq!(at[idx], traj.states[7][idx]);
        let t = 0.1234;
        let v = traj.interpolate(t).unwrap()[idx];
        assert!((v - Complex64::from_polar(1.0, -9.0 * t)).norm() < 1e-8);
        assert!(traj.interpolate(0.6).is_err());
    }

    #[test]
    fn guards() {
        let sys = ResonantSystem::new(1, Sign::Plus);
        let a = AmplitudeField::five_mode_datum(1);
        assert!(sys.integrate(&a, 1.0, 0.0, 1).is_err());
        assert!(sys.integrate(&a, -1.0, 0.1, 1).is_err());
        // A huge step blows the l1 norm past the guard.
        let big = sys.with_leak_tolerance(None);
        let mut strong = AmplitudeField::new(1);
        for j in five_mode_set() {
            strong.set(j, c(3.0, 0.0)).unwrap();
        }
        assert!(matches!(big.integrate(&strong, 10.0, 0.5, 1), Err(Error::Divergence { .. })));
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(1.0, 1e-3), 1000);
        assert_eq!(step_count(0.3, 0.1), 3);
        assert_eq!(step_count(0.35, 0.1), 4);
    }
}
