use nls_cascade::cascade::{cascade_report, layer_time, CascadeSettings};
use nls_cascade::lattice::{extremal_modes, five_mode_set, generate_mode_sets};
use nls_cascade::resonant::{AmplitudeField, ResonantSystem};
use nls_cascade::series::ModeSeries;
use nls_cascade::{Complex64, ModeIndex, Sign};

fn relative(a: f64, b: f64) -> f64 {
    ((b - a) / a).abs()
}

fn drift(sys: &ResonantSystem, dt: f64) -> [f64; 3] {
    let a0 = AmplitudeField::five_mode_datum(sys.radius());
    let traj = sys.integrate(&a0, 0.5, dt, 100).unwrap();
    let first = sys.conserved(&traj.states[0]);
    let last = sys.conserved(&traj.states[traj.len() - 1]);
    [
        relative(first.mass, last.mass),
        relative(first.h0, last.h0),
        relative(first.z, last.z),
    ]
}

#[test]
fn conservation_and_fourth_order_drift() {
    let sys = ResonantSystem::new(6, Sign::Plus);
    let coarse = drift(&sys, 1e-3);
    let fine = drift(&sys, 5e-4);
    for q in 0..3 {
        assert!(coarse[q] <= 1e-8, "quantity {q}: {}", coarse[q]);
        let ratio = coarse[q] / fine[q];
        assert!((12.0..=20.0).contains(&ratio), "quantity {q}: ratio {ratio}");
    }
}

#[test]
fn gauge_covariance() {
    let sys = ResonantSystem::new(4, Sign::Minus);
    let a0 = AmplitudeField::five_mode_datum(4);
    let g = Complex64::from_polar(1.0, 0.7);
    let plain = sys.integrate(&a0, 0.2, 1e-3, 10).unwrap();
    let turned = sys.integrate(&a0.scaled(g), 0.2, 1e-3, 10).unwrap();
    for (p, t) in plain.states.iter().zip(&turned.states) {
        for (a, b) in p.iter().zip(t) {
            assert!((a * g - b).norm() <= 1e-13, "{a} {b}");
        }
    }
}

#[test]
fn support_grows_by_generations() {
    // one RK4 step makes four right-hand-side evaluations, so the support
    // reaches N^(4) and no further
    let sys = ResonantSystem::new(6, Sign::Plus).with_leak_tolerance(None);
    let seq = generate_mode_sets(&five_mode_set(), 4).unwrap();
    let traj = sys.integrate(&AmplitudeField::five_mode_datum(6), 1e-4, 1e-4, 1).unwrap();
    let last = &traj.states[traj.len() - 1];
    for (j, v) in traj.modes.iter().zip(last) {
        match seq.generation_of(*j) {
            Some(k) if k <= 3 => assert!(v.norm() > 0.0, "{j} in J_{k} is zero"),
            Some(_) => {}
            None => assert_eq!(*v, Complex64::default(), "{j} outside N^(4)"),
        }
    }
}

fn cascade_series() -> (ModeSeries, f64) {
    let eps = 1e-3;
    let sys = ResonantSystem::new(6, Sign::Plus);
    let traj = sys
        .integrate(&AmplitudeField::five_mode_datum(6), 0.7, 1e-4, 1)
        .unwrap();
    let watch: Vec<ModeIndex> = (0..=3).flat_map(extremal_modes).collect();
    (ModeSeries::from_trajectory(&traj, &watch, eps), eps)
}

#[test]
fn equal_ignition_within_generation() {
    let (series, eps) = cascade_series();
    let report = cascade_report(&series, eps, Sign::Plus, &CascadeSettings::default(), None).unwrap();
    for n in 1..=3u32 {
        let times: Vec<Option<f64>> = report
            .records
            .iter()
            .filter(|r| r.generation == n)
            .map(|r| r.ignition_time)
            .collect();
        assert_eq!(times.len(), 4);
        assert!(times.iter().all(|t| *t == times[0]), "n = {n}: {times:?}");
    }
}

#[test]
fn layer_time_increases_with_mode_size() {
    let mut last = 0.0;
    for n in 1..=8u32 {
        let j = *extremal_modes(n).iter().next().unwrap();
        let t = layer_time(1e-3, 0.5, j).unwrap();
        assert!(t > last, "n = {n}");
        last = t;
    }
}
