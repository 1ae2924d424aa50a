use mcaoi::{
    aoi_mp_general, aoi_renewal, aoi_scheme, epsilon_cs, epsilon_ms, epsilon_pd, epsilon_single, log_phi,
    mp_aoi_quadratic, optimize_blocklength, q_function, simulate, BlocklengthRange, ChannelSet, ErrorProbability,
    Schedule, SchemeConfig, SchemeSpec, ShiftMode, ShiftSearch, SimConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chans(snrs: &[f64]) -> ChannelSet<f64> {
    ChannelSet::new(snrs.to_vec()).unwrap()
}

fn ep(v: f64) -> ErrorProbability<f64> {
    ErrorProbability::new(v).unwrap()
}

fn sorted_shifts(n: f64, raw: &[f64]) -> Schedule<f64> {
    let mut shifts: Vec<f64> = raw.iter().map(|u| u * n).collect();
    shifts[0] = 0.0;
    shifts.sort_by(f64::total_cmp);
    Schedule::new(n, shifts).unwrap()
}

#[test]
fn epsilon_monotone_on_grid() {
    for &g in &[0.5, 1.0, 2.0, 5.0] {
        for &n in &[20.0, 100.0] {
            let mut last = -1.0;
            for k in 1..60 {
                let e = epsilon_single(n, f64::from(k), g).unwrap().value();
                assert!(e >= last, "k={k} n={n} snr={g}");
                last = e;
            }
        }
    }
    for &k in &[8.0, 32.0] {
        let mut last = 2.0;
        for i in 1..40 {
            let e = epsilon_single(40.0, k, f64::from(i) * 0.25).unwrap().value();
            assert!(e <= last);
            last = e;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn epsilons_are_probabilities_and_compose(
        snrs in proptest::collection::vec(0.1_f64..20.0, 1..=5),
        n in 1.0_f64..500.0,
        k in 0.0_f64..200.0,
    ) {
        let c = chans(&snrs);
        let pd = epsilon_pd(n, k, &c).unwrap().value();
        let cs = epsilon_cs(n, k, &c).unwrap().value();
        prop_assert!((0.0..=1.0).contains(&pd) && (0.0..=1.0).contains(&cs));
        for &g in &snrs {
            prop_assert!(pd <= epsilon_single(n, k, g).unwrap().value());
        }
        let share = k / snrs.len() as f64;
        let splits = vec![share; snrs.len()];
        let ms = epsilon_ms(n, &splits, &c).unwrap().value();
        prop_assert!((0.0..=1.0).contains(&ms));
        for &g in &snrs {
            prop_assert!(ms >= epsilon_single(n, share, g).unwrap().value() || share == 0.0);
        }
    }

    #[test]
    fn one_channel_reductions(g in 0.1_f64..20.0, n in 1.0_f64..500.0, k in 0.0_f64..200.0) {
        let c = chans(&[g]);
        let sc = epsilon_single(n, k, g).unwrap();
        prop_assert_eq!(epsilon_pd(n, k, &c).unwrap(), sc);
        prop_assert_eq!(epsilon_cs(n, k, &c).unwrap(), sc);
        prop_assert_eq!(epsilon_ms(n, &[k], &c).unwrap(), sc);
    }

    #[test]
    fn gaussian_identities(x in -8.0_f64..8.0) {
        prop_assert!((q_function(x) + q_function(-x) - 1.0).abs() <= 1e-12);
        let upper = q_function(-x);
        prop_assert!((log_phi(x).exp() - upper).abs() <= 1e-9 * upper);
    }

    #[test]
    fn renewal_bound_and_monotonicity(n in 1.0_f64..1000.0, a in 0.0_f64..0.99, b in 0.0_f64..0.99) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let r_lo = aoi_renewal(n, ep(lo)).unwrap().avg_aoi;
        let r_hi = aoi_renewal(n, ep(hi)).unwrap().avg_aoi;
        prop_assert!(r_lo >= 1.5 * n);
        prop_assert!(lo == hi || r_lo < r_hi);
        prop_assert_eq!(aoi_renewal(n, ep(0.0)).unwrap().avg_aoi, 1.5 * n);
    }

    #[test]
    fn renewal_schemes_respect_lower_bound(
        snrs in proptest::collection::vec(0.5_f64..10.0, 2..=4),
        n in 5.0_f64..200.0,
        k in 1.0_f64..64.0,
    ) {
        let c = chans(&snrs);
        let splits = vec![k / snrs.len() as f64; snrs.len()];
        for config in [
            SchemeConfig::Sc { n, k, channel: 0 },
            SchemeConfig::Pd { n, k },
            SchemeConfig::Cs { n, k },
            SchemeConfig::Ms { n, splits },
        ] {
            let v = aoi_scheme(&config, &c).unwrap().avg_aoi;
            prop_assert!(v >= 1.5 * n, "{config:?}: {v}");
        }
    }

    #[test]
    fn quadratic_form_equals_general(
        raw in proptest::collection::vec(0.0_f64..1.0, 1..=6),
        e in 0.01_f64..0.95,
        n in 1.0_f64..300.0,
    ) {
        let schedule = sorted_shifts(n, &raw);
        let general = aoi_mp_general(&schedule, &vec![ep(e); raw.len()]).unwrap().0.avg_aoi;
        let quad = mp_aoi_quadratic(&schedule, ep(e)).unwrap();
        prop_assert!((general - quad).abs() <= 1e-9 * general);
    }

    #[test]
    fn moments_satisfy_jensen(
        raw in proptest::collection::vec(0.0_f64..1.0, 1..=6),
        eps in proptest::collection::vec(0.0_f64..0.95, 6),
        n in 1.0_f64..300.0,
    ) {
        let schedule = sorted_shifts(n, &raw);
        let e: Vec<_> = eps[..raw.len()].iter().map(|&v| ep(v)).collect();
        let (_, m) = aoi_mp_general(&schedule, &e).unwrap();
        for (first, second) in m.first.iter().zip(&m.second) {
            prop_assert!(*second >= first * first * (1.0 - 1e-12));
        }
        let total: f64 = m.stationary_weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn uniform_schedule_beats_local_perturbations() {
    let n = 120.0;
    for count in 2..=5 {
        for &e in &[0.05, 0.3, 0.7] {
            let eps = vec![ep(e); count];
            let uniform = Schedule::uniform(n, count).unwrap();
            let best = aoi_mp_general(&uniform, &eps).unwrap().0.avg_aoi;
            for moved in 1..count {
                for step in -20..=20 {
                    let mut shifts = uniform.shifts().to_vec();
                    shifts[moved] += f64::from(step) * 0.25;
                    let Ok(s) = Schedule::new(n, shifts) else { continue };
                    let v = aoi_mp_general(&s, &eps).unwrap().0.avg_aoi;
                    assert!(v >= best - 1e-9 * best, "N={count} eps={e} moved={moved} step={step}");
                }
            }
        }
    }
}

#[test]
fn blocklength_search_is_deterministic() {
    let c = chans(&[2.0, 0.7, 3.1]);
    let range = BlocklengthRange::default_for(24, &c);
    for spec in [
        SchemeSpec::Sc { channel: 1 },
        SchemeSpec::Pd,
        SchemeSpec::Cs,
        SchemeSpec::Mp {
            shifts: ShiftMode::Integer,
            search: ShiftSearch::Auto,
        },
    ] {
        let a = optimize_blocklength(spec, 24, &c, range).unwrap();
        let b = optimize_blocklength(spec, 24, &c, range).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn simulator_agrees_with_analysis_on_random_configs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for scheme in 0..5 {
        for trial in 0..20u64 {
            let count = rng.random_range(2..=4);
            let n = rng.random_range(20..=120u64) as f64;
            let eps: Vec<f64> = (0..count).map(|_| rng.random_range(0.02..0.7)).collect();
            let c = ChannelSet::homogeneous(count, 1.0).unwrap();
            let (config, errors) = match scheme {
                0 => (SchemeConfig::Sc { n, k: 8.0, channel: 0 }, vec![eps[0]]),
                1 => (SchemeConfig::Pd { n, k: 8.0 }, eps.clone()),
                2 => (SchemeConfig::Cs { n, k: 8.0 }, vec![eps[0]]),
                3 => (SchemeConfig::Ms { n, splits: vec![4.0; count] }, eps.clone()),
                _ => {
                    let mut shifts: Vec<f64> =
                        (0..count).map(|i| if i == 0 { 0.0 } else { rng.random_range(0..n as u64) as f64 }).collect();
                    shifts.sort_by(f64::total_cmp);
                    (SchemeConfig::Mp { k: 8.0, schedule: Schedule::new(n, shifts).unwrap() }, eps.clone())
                }
            };
            let sim_config = SimConfig::new(config, c, 10_000_000, trial).with_errors(errors);
            let analytic = mcaoi::simulate::analytic_aoi(&sim_config).unwrap().avg_aoi;
            let sim = simulate(&sim_config).unwrap();
            let tol = (3.0 * sim.ci_halfwidth).max(0.005 * analytic);
            assert!((sim.avg_aoi - analytic).abs() <= tol, "{sim_config:?}: {} vs {analytic}", sim.avg_aoi);
            assert_eq!(simulate(&sim_config).unwrap(), sim);
        }
    }
}
