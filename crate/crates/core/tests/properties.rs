use proptest::prelude::*;

use wpan_perf::analytical::{self, SolverSettings};
use wpan_perf::dataset::{self, analytical_row, ResultRow};
use wpan_perf::metrics;
use wpan_perf::predictor::{self, MlpArchitecture, MlpModel};
use wpan_perf::queueing;
use wpan_perf::simulator::{self, SimConfig};
use wpan_perf::{NetworkConfig, TrafficMode};

fn unsaturated() -> impl Strategy<Value = NetworkConfig> {
    (2u32..=60, 30u32..=127, 0.001f64..0.2, prop_oneof![Just(1u32), 2u32..=10]).prop_map(|(n, l, r, m)| {
        if m == 1 {
            NetworkConfig::unsat1(n, l, r)
        } else {
            NetworkConfig::unsat_m(n, l, r, m)
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solution_is_a_fixed_point(cfg in unsaturated()) {
        let fp = analytical::solve(&cfg, &SolverSettings::default()).unwrap();
        prop_assert!(fp.converged);
        prop_assert!(fp.tau > 0.0 && fp.tau < 1.0);
        // Re-evaluate both halves of the coupled system from the public pieces.
        let a = analytical::a_from_tau(fp.tau, cfg.nodes, cfg.frame_bytes).unwrap();
        prop_assert_eq!(a, fp.a);
        let p0 = match cfg.mode {
            TrafficMode::UnsatM => {
                let s = metrics::service_summary(fp.tau, a, cfg.nodes, cfg.frame_bytes).unwrap();
                Some(queueing::empty_prob(queueing::utilization(cfg.rate, cfg.frame_bytes, s.delays.tvs), cfg.buffer))
            }
            _ => None,
        };
        let rhs = analytical::tau_update(fp.tau, a, &cfg, p0).unwrap();
        prop_assert!((rhs - fp.tau).abs() <= 1e-12, "residual {}", (rhs - fp.tau).abs());
    }

    #[test]
    fn report_is_in_range(cfg in unsaturated()) {
        let fp = analytical::solve(&cfg, &SolverSettings::default()).unwrap();
        let r = metrics::report(&cfg, &fp).unwrap();
        prop_assert!((0.0..1.0).contains(&r.a));
        prop_assert!((0.0..=1.0).contains(&r.th));
        let ps = r.ps.unwrap();
        prop_assert!((0.0..=1.0).contains(&ps));
        let ts = r.ts.unwrap();
        prop_assert!(ts >= f64::from(132 + 2 * cfg.frame_bytes) - 1e-9);
        prop_assert_eq!(r.tsw.is_some(), cfg.mode == TrafficMode::UnsatM);
        if let (Some(tsw), Some(tvsw)) = (r.tsw, r.tvsw) {
            prop_assert!(tsw >= ts && tvsw >= r.tvs.unwrap());
            prop_assert!((tsw - ts - (tvsw - r.tvs.unwrap())).abs() < 1e-9 * tsw);
        }
    }

    #[test]
    fn more_load_more_contention(n in 2u32..=30, l in 30u32..=127, r in 0.001f64..0.1) {
        let s = SolverSettings::default();
        let lo = analytical::solve(&NetworkConfig::unsat1(n, l, r), &s).unwrap();
        let hi = analytical::solve(&NetworkConfig::unsat1(n, l, r * 1.5), &s).unwrap();
        prop_assert!(hi.tau >= lo.tau && hi.a >= lo.a);
    }

    #[test]
    fn buffer_distribution_is_consistent(p in 0.01f64..3.0, m in 1u32..=12) {
        let p0 = queueing::empty_prob(p, m);
        let pm = queueing::full_prob(p, m);
        prop_assert!((p0 * p.powi(m as i32) - pm).abs() <= 1e-12 * pm.max(1e-300).max(p0));
        let lq = queueing::mean_waiting(p, m);
        prop_assert!(lq >= 0.0 && lq <= f64::from(m - 1));
        prop_assert!(queueing::empty_prob(p * 1.1, m) <= p0);
    }

    #[test]
    fn model_text_round_trip(h1 in 1usize..12, h2 in 1usize..12, h3 in 1usize..12, seed in any::<u64>()) {
        let model = predictor::init(MlpArchitecture::new(4, [h1, h2, h3], 1), seed).unwrap();
        let back: MlpModel = model.to_text().parse().unwrap();
        prop_assert_eq!(&back, &model);
        let x = [0.3, 0.7, 0.1, 0.9];
        prop_assert_eq!(back.forward(&x).to_bits(), model.forward(&x).to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_conserves_frames(
        n in 1u32..=8,
        l in 30u32..=127,
        r in 0.0f64..0.5,
        m in 1u32..=4,
        seed in any::<u32>(),
        saturated in any::<bool>(),
    ) {
        let net = match (saturated, m) {
            (true, _) => NetworkConfig::saturated(n, l),
            (false, 1) => NetworkConfig::unsat1(n, l, r),
            (false, m) => NetworkConfig::unsat_m(n, l, r, m),
        };
        let cfg = SimConfig::new(net, 40_000).with_replications(1).with_seed(u64::from(seed));
        let rep = simulator::run_replication(&cfg, 0, &Default::default()).unwrap();
        let c = &rep.counters;
        prop_assert!(c.conserved());
        prop_assert!(c.cca_busy <= c.cca_starts);
        prop_assert!(c.channel_busy_symbols <= c.measured_slots);
        prop_assert!(c.success_payload_symbols <= c.channel_busy_symbols);
        let e = &rep.estimates;
        prop_assert!((0.0..=1.0).contains(&e.th));
        if n == 1 {
            prop_assert_eq!(c.cca_busy, 0);
        }
        let again = simulator::run_replication(&cfg, 0, &Default::default()).unwrap();
        prop_assert_eq!(&again.counters, c);
    }
}

#[test]
fn sweep_csv_compare_pipeline() {
    let cfgs = [NetworkConfig::unsat1(3, 40, 0.02), NetworkConfig::unsat1(6, 40, 0.04), NetworkConfig::saturated(4, 60)];
    let analytical: Vec<ResultRow> = cfgs.iter().map(|c| analytical_row(c, &SolverSettings::default())).collect();
    let sim = dataset::SimSettings { horizon: 50_000, warmup: None, replications: 4, base_seed: 9 };
    let simulated: Vec<ResultRow> = cfgs.iter().map(|c| dataset::simulated_row(c, &sim)).collect();

    let mut buf = Vec::new();
    dataset::write_csv_to(&analytical, &mut buf, true).unwrap();
    let back = dataset::read_csv_from(buf.as_slice()).unwrap();
    assert_eq!(back, analytical);

    let cmp = dataset::compare(&back, &simulated).unwrap();
    assert_eq!(cmp.differences.iter().filter(|d| d.metric == dataset::Metric::Th).count(), 3);
    for d in &cmp.differences {
        assert_eq!(d.diff, d.analytical - d.simulated);
        assert_eq!(d.abs_diff, d.diff.abs());
    }
    assert!(dataset::compare(&back[..2], &simulated).is_err());
}
