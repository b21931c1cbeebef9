use proptest::prelude::*;

use pi2lab::cc_models::{rate_creno, rate_cubic, switchover_rtt, CcParams};
use pi2lab::dataset::{bundled_dataset, weighted_summary};
use pi2lab::geometry::{
    lambda0_aimd_approx, lambda0_aimd_full, recovery_time, rounds_per_cycle, rtt_scaling,
    transition_region,
};
use pi2lab::{Pi2Config, RttKind};

proptest! {
    #[test]
    fn rates_decrease_in_p_and_rtt(p in 1e-6f64..0.2, r in 1e-3f64..1.0, k in 1.01f64..4.0) {
        let cubic = CcParams::cubic();
        for f in [
            |p, r, c: &CcParams| rate_cubic(p, r, c).unwrap(),
            |p, r, _: &CcParams| rate_creno(p, r).unwrap(),
        ] {
            let base = f(p, r, &cubic);
            prop_assert!(base.is_finite() && base > 0.0);
            prop_assert!(f(p * k, r, &cubic) < base);
            prop_assert!(f(p, r * k, &cubic) < base);
        }
    }

    #[test]
    fn switchover_is_the_unique_crossing(rate in 1.0f64..1e6, k in 1.05f64..3.0) {
        let cubic = CcParams::cubic();
        let r_s = switchover_rtt(rate, &cubic).unwrap();
        // Loss probability that gives CReno `rate` at the switchover RTT.
        let p = 1.5 / (rate * r_s).powi(2);
        let below = r_s / k;
        let above = r_s * k;
        prop_assert!(rate_creno(p, below).unwrap() > rate_cubic(p, below, &cubic).unwrap());
        prop_assert!(rate_creno(p, above).unwrap() < rate_cubic(p, above, &cubic).unwrap());
    }

    #[test]
    fn recovery_forms_agree(b in 0.3f64..0.9, rate in 10.0f64..1e5, r_avg in 1e-3f64..0.3) {
        let params = CcParams::new(pi2lab::CcMode::Reno, 1.0, b, 0.4).unwrap();
        let l0 = lambda0_aimd_approx(b).unwrap();
        let s = rtt_scaling(r_avg, l0, b).unwrap();
        let t_avg = recovery_time(rate, r_avg, RttKind::Avg, &params).unwrap();
        let t_min = recovery_time(rate, s.r_min, RttKind::Min, &params).unwrap();
        let t_max = recovery_time(rate, s.r_max, RttKind::Max, &params).unwrap();
        prop_assert!(((t_min - t_avg) / t_avg).abs() < 1e-12);
        prop_assert!(((t_max - t_avg) / t_avg).abs() < 1e-12);
    }

    #[test]
    fn rounds_balance(a in 0.1f64..2.0, b in 0.3f64..0.9, rate in 10.0f64..1e5, r_min in 1e-3f64..0.3) {
        let params = CcParams::new(pi2lab::CcMode::Reno, a, b, 0.4).unwrap();
        let j = rounds_per_cycle(rate, r_min, &params).unwrap();
        let lhs = j * a / rate;
        let rhs = r_min * (1.0 - b) / b;
        prop_assert!(((lhs - rhs) / rhs).abs() < 1e-12);
    }

    #[test]
    fn transition_bounds_invert(rate in 10.0f64..1e6, tupdate in 0.005f64..0.03, ratio in 1.5f64..20.0) {
        let cfg = Pi2Config::new(0.015, tupdate, tupdate * ratio).unwrap();
        let creno = CcParams::creno();
        let t = transition_region(rate, &cfg, &creno).unwrap();
        prop_assert!(t.rtt_floor < t.rtt_center);
        let floor = recovery_time(rate, t.rtt_floor, RttKind::Avg, &creno).unwrap();
        let center = recovery_time(rate, t.rtt_center, RttKind::Avg, &creno).unwrap();
        prop_assert!(((floor - cfg.tupdate) / cfg.tupdate).abs() < 1e-9);
        prop_assert!(((center - cfg.rmax) / cfg.rmax).abs() < 1e-9);
    }

    #[test]
    fn summary_is_permutation_invariant(seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut records = bundled_dataset();
        let before = weighted_summary(&records, &[]).unwrap();
        records.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let after = weighted_summary(&records, &[]).unwrap();
        prop_assert_eq!(before.total_users, after.total_users);
        prop_assert!((before.weighted_rtt_ms - after.weighted_rtt_ms).abs() < 1e-9);
        prop_assert!((before.weighted_bw_mbps - after.weighted_bw_mbps).abs() < 1e-9);
    }

    #[test]
    fn exclusions_only_remove_weight(mask in proptest::collection::vec(any::<bool>(), 43)) {
        let records = bundled_dataset();
        let excluded: Vec<String> = records
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(r, _)| r.name.clone())
            .collect();
        let all = weighted_summary(&records, &[]).unwrap();
        if let Ok(some) = weighted_summary(&records, &excluded) {
            prop_assert!(some.total_users <= all.total_users);
            let mut fewer = excluded.clone();
            fewer.pop();
            let more = weighted_summary(&records, &fewer).unwrap();
            prop_assert!(more.total_users >= some.total_users);
        } else {
            prop_assert_eq!(excluded.len(), records.len());
        }
    }
}

#[test]
fn full_form_reduces_to_approx_on_grid() {
    for i in 1..=19 {
        let b = 0.05 * i as f64;
        if b >= 0.95 + 1e-12 {
            break;
        }
        assert_eq!(lambda0_aimd_full(b, 0.0).unwrap(), lambda0_aimd_approx(b).unwrap());
    }
}
