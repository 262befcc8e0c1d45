use std::f64::consts::PI;

use mhd25_core::diagnostics::fit_decay_exponent;
use mhd25_core::harness::experiment::records_to_csv;
use mhd25_core::harness::{ExperimentConfig, InitKind, Polarization, RunMode};
use mhd25_core::integrator::{compute_dt, Scheme, StepControl, Stepper};
use mhd25_core::linear::{acoustic_eigenvalues, ModeSymbol};
use mhd25_core::littlewood_paley::{block_sum, CutoffPair, LittlewoodPaley, TransitionProfile};
use mhd25_core::rhs::rhs_full;
use mhd25_core::spectral::{helmholtz_project, random_spectrum, SpectralGrid, VectorField};
use mhd25_core::state::{PerturbationState, PhysicalParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state_from_seed(n: usize, l: f64, seed: u64, amp: f64) -> PerturbationState {
    let grid = SpectralGrid::new(n, l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let f = random_spectrum(&grid, &mut rng, n / 3).to_field();
        let m = f.max_abs();
        f.scaled(amp / m)
    };
    let a = draw();
    let ux = draw();
    let uy = draw();
    let b = draw();
    PerturbationState::new(a, VectorField::new(ux, uy).unwrap(), b, 0.0).unwrap()
}

fn params() -> impl Strategy<Value = PhysicalParams> {
    (0.1..5.0_f64, 0.0..3.0_f64, 0.2..4.0_f64, 1.0..3.0_f64)
        .prop_map(|(mu, lambda, a, g)| PhysicalParams::new(mu, lambda, a, g).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_of_unity_holds_at_any_radius(r in 1e-6..1e6_f64) {
        let c = CutoffPair::build(TransitionProfile::SmoothExponential);
        let (defect, _) = c.partition_defect([r]);
        prop_assert!(defect <= 1e-12);
    }

    #[test]
    fn phi_matches_its_polynomial_form(a in -0.5..0.5_f64, b in -5.0..5.0_f64) {
        let p = PhysicalParams::default();
        let want = a * a + 2.0 * a + 0.5 * b * b + b;
        prop_assert!((p.phi(a, b) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn linear_modes_are_damped(k in 1e-3..1e3_f64, p in params()) {
        let (slow, fast) = acoustic_eigenvalues(k, &p).unwrap();
        prop_assert!(slow.re < 0.0 && fast.re < 0.0);
        let m = ModeSymbol::new(k, &p).unwrap();
        let tr = m.mat2.trace();
        prop_assert!(((slow + fast).re - tr).abs() <= 1e-9 * tr.abs());
    }

    #[test]
    fn decay_fit_recovers_planted_power_laws(p in -3.0..0.5_f64, c in 1e-8..1e3_f64, t0 in 0.0..10.0_f64) {
        let series: Vec<(f64, f64)> = (0..60).map(|i| {
            let t = t0 + i as f64;
            (t, c * (1.0 + t).powf(p))
        }).collect();
        let fit = fit_decay_exponent("q", &series, (t0, t0 + 59.0), Some(p)).unwrap();
        prop_assert!((fit.exponent - p).abs() <= 1e-9);
        prop_assert!(fit.r_squared >= 1.0 - 1e-9 || p.abs() < 1e-6);
    }

    #[test]
    fn seventeen_digit_csv_values_round_trip(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        let s = format!("{v:.16e}");
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn helmholtz_split_is_an_orthogonal_projection(seed in any::<u64>(), l in 0.5..100.0_f64) {
        let s = state_from_seed(32, l, seed, 1.0);
        let (p, q) = helmholtz_project(&s.u);
        let n = s.u.l2_norm();
        prop_assert!(p.add(&q).unwrap().sub(&s.u).unwrap().l2_norm() <= 1e-12 * n);
        prop_assert!(p.inner(&q).unwrap().abs() <= 1e-12 * n * n);
        let (pp, pq) = helmholtz_project(&p);
        prop_assert!(pp.sub(&p).unwrap().l2_norm() <= 1e-12 * n);
        prop_assert!(pq.l2_norm() <= 1e-12 * n);
    }

    #[test]
    fn blocks_rebuild_the_mean_free_part(seed in any::<u64>(), n_pow in 3u32..7, l in 0.1..1000.0_f64) {
        let n = 1usize << n_pow;
        let s = state_from_seed(n, l, seed, 1.0);
        let lp = LittlewoodPaley::with_default_cutoffs(s.grid().clone());
        let f = s.a.spectrum();
        let rebuilt = block_sum(&lp, &f);
        prop_assert!(rebuilt.axpy(-1.0, &f).unwrap().l2_norm() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn tendency_commutes_with_lattice_shifts(seed in any::<u64>(), s1 in 0usize..16, s2 in 0usize..16, amp in 1e-6..0.4_f64) {
        let s = state_from_seed(16, 2.0 * PI, seed, amp);
        let p = PhysicalParams::default();
        let shifted = rhs_full(&s.shifted(s1, s2), &p).unwrap();
        let t = rhs_full(&s, &p).unwrap();
        let scale = t.l2_norm();
        prop_assert!((shifted.da.sub(&t.da.shifted(s1, s2)).unwrap().l2_norm()) <= 1e-12 * scale);
        prop_assert!((shifted.du.sub(&t.du.shifted(s1, s2)).unwrap().l2_norm()) <= 1e-12 * scale);
        prop_assert!((shifted.db.sub(&t.db.shifted(s1, s2)).unwrap().l2_norm()) <= 1e-12 * scale);
    }

    #[test]
    fn totals_are_conserved_by_every_step(seed in any::<u64>(), amp in 1e-6..0.1_f64, rk2 in any::<bool>()) {
        let s0 = state_from_seed(16, 2.0 * PI, seed, amp);
        let p = PhysicalParams::default();
        let ctl = StepControl {
            t_end: 1e9,
            scheme: if rk2 { Scheme::IfRk2 } else { Scheme::IfRk3 },
            ..StepControl::default()
        };
        let dt = compute_dt(&s0, &p, &ctl);
        prop_assert!(dt > 0.0 && dt <= ctl.dt_max);
        let mut st = Stepper::new(&s0, &p, &ctl).unwrap();
        for _ in 0..20 {
            st.advance(None).unwrap();
        }
        let s1 = st.state();
        prop_assert!((s1.a.integral() - s0.a.integral()).abs() <= 1e-14);
        prop_assert!((s1.b.integral() - s0.b.integral()).abs() <= 1e-14);
    }

    #[test]
    fn config_echo_round_trips(
        n_pow in 3u32..10,
        l in 0.1..1e3_f64,
        p in params(),
        t_end in 0.0..1e3_f64,
        cfl in 0.01..1.0_f64,
        kind in 0usize..3,
        amp in 0.0..0.1_f64,
        seed in any::<u64>(),
        mode in 0usize..3,
        j0 in -5i32..5,
        sigma in 0.01..1.0_f64,
        stride in 1usize..1000,
    ) {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.n = 1 << n_pow;
        cfg.grid.box_length = l;
        cfg.params = p;
        cfg.time.t_end = t_end;
        cfg.time.cfl = cfl;
        cfg.init.kind = [InitKind::RandomSpectrum, InitKind::SingleMode, InitKind::GaussianBlob][kind];
        cfg.init.polarization = if seed % 2 == 0 { Polarization::Compressible } else { Polarization::Solenoidal };
        cfg.init.amplitude = amp;
        cfg.init.seed = seed;
        cfg.lp.j0 = j0;
        cfg.lp.sigma = sigma;
        cfg.output.stride = stride;
        cfg.output.fit_window = Some((t_end / 3.0, t_end + 1.0));
        cfg.mode = [RunMode::Nonlinear, RunMode::LinearOracle, RunMode::HeatReference][mode];
        let echo = cfg.to_config_string();
        let back: ExperimentConfig = echo.parse().unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn csv_is_lf_terminated_with_one_row_per_record() {
    let csv = records_to_csv(&[]);
    assert_eq!(csv.matches('\n').count(), 1);
    assert!(!csv.contains('\r'));
}
