use nls_cascade::approx::{convergence_study, wiener_error, CompareParams};
use nls_cascade::cascade::consistency_ratio;
use nls_cascade::lattice::extremal_modes;
use nls_cascade::resonant::AmplitudeField;
use nls_cascade::spectral::{frequency, Dealias, NlsParams, SpectralGrid, SplitStepSolver, Splitting};
use nls_cascade::{Complex64, ModeIndex, Sign};
use proptest::prelude::*;

fn params(k: usize, t_final: f64) -> NlsParams {
    NlsParams {
        lambda: Sign::Plus,
        coupling: 1.0,
        tau: 1e-3,
        t_final,
        k,
        record_stride: 100,
        splitting: Splitting::Strang,
        dealias: Dealias::Off,
    }
}

fn five_mode(k: usize, delta: f64) -> SpectralGrid {
    SpectralGrid::synthesize(
        k,
        AmplitudeField::five_mode_datum(5).iter().map(|(j, a)| (j, a * delta)),
    )
    .unwrap()
}

#[test]
fn dihedral_symmetry_persists() {
    let k = 64;
    let mut s = SplitStepSolver::new(&five_mode(k, 0.3), params(k, 5.0)).unwrap();
    for _ in 0..5000 {
        s.step().unwrap();
    }
    let modes = s.modes();
    let scale = modes.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    for (j, v) in modes.iter() {
        for g in 0..8 {
            let w = modes.get(j.dihedral(g));
            assert!((v - w).norm() <= 1e-10 * scale, "{j} under {g}: {v} vs {w}");
        }
    }
}

#[test]
fn spectrum_stays_inside_the_grid() {
    let k = 128;
    let mut s = SplitStepSolver::new(&five_mode(k, 0.0158), params(k, 10.0)).unwrap();
    let quarter = (k / 4) as i64;
    let outer: Vec<usize> = (0..k * k)
        .filter(|&i| {
            let j = ModeIndex::new(frequency(i / k, k), frequency(i % k, k));
            j.max_norm() > quarter
        })
        .collect();
    for n in 1..=10_000 {
        s.step().unwrap();
        if n % 500 == 0 {
            let c = s.coefficients();
            let tail: f64 = outer.iter().map(|&i| c[i].norm_sqr()).sum();
            assert!(tail < 1e-10 * s.mass(), "t = {}: tail {tail:e}", s.time());
        }
    }
}

#[test]
fn consistency_ratio_bounded_across_halving() {
    let watch: Vec<ModeIndex> = (0..=2).flat_map(extremal_modes).collect();
    let params = CompareParams {
        datum: AmplitudeField::five_mode_datum(6),
        lambda: Sign::Plus,
        grid_k: 64,
        tau: 1e-3,
        compare_stride: 10,
        resonant_dt: 1e-3,
        resonant_radius: 6,
        splitting: Splitting::Strang,
        watch,
    };
    let study = convergence_study(&[0.02, 0.01], 0.5, &params).unwrap();
    let r: Vec<f64> = study
        .reports
        .iter()
        .map(|rep| consistency_ratio(&rep.series, rep.epsilon, Sign::Plus, 2))
        .collect();
    assert!(r[0].is_finite() && r[0] > 0.0);
    assert!(r[1] <= 2.0 * r[0], "{r:?}");
}

fn field(entries: Vec<(i64, i64, f64, f64)>) -> AmplitudeField {
    AmplitudeField::from_entries(
        4,
        entries.into_iter().map(|(a, b, re, im)| (ModeIndex::new(a, b), Complex64::new(re, im))),
    )
    .unwrap()
}

fn entries() -> impl Strategy<Value = Vec<(i64, i64, f64, f64)>> {
    prop::collection::vec((-4i64..=4, -4i64..=4, -1.0f64..1.0, -1.0f64..1.0), 0..12)
}

proptest! {
    #[test]
    fn wiener_error_is_a_metric(a in entries(), b in entries(), c in entries()) {
        let (a, b, c) = (field(a), field(b), field(c));
        let ab = wiener_error(&a, &b);
        prop_assert_eq!(ab, wiener_error(&b, &a));
        prop_assert_eq!(wiener_error(&a, &a), 0.0);
        prop_assert!(ab <= wiener_error(&a, &c) + wiener_error(&c, &b) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mass_conserved_on_random_data(seed in 0u64..1000) {
        let k = 32;
        let mut state = seed.wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let coeffs: Vec<(ModeIndex, Complex64)> = (-4i64..=4)
            .flat_map(|a| (-4i64..=4).map(move |b| ModeIndex::new(a, b)))
            .map(|j| (j, Complex64::new(next(), next()) * 0.1))
            .collect();
        let g = SpectralGrid::synthesize(k, coeffs).unwrap();
        let mut s = SplitStepSolver::new(&g, params(k, 1.0)).unwrap();
        let m0 = s.mass();
        for _ in 0..1000 {
            s.step().unwrap();
        }
        prop_assert!(((s.mass() - m0) / m0).abs() <= 1e-13);
    }
}
