//! Property-based invariants across modules.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{rescale, PriceSeries, ScaleMode};
use crate::forecaster::{kernel_eval, ForecasterState, KernelMode};
use crate::grid::{joint_weights, randomize_point, rounding_weights, ForecastPoint, PartitionGrid};
use crate::trading::{
    aggregate_strategies, gain_decomposition, limited_risk_step, simple_total_gain, DecisionRecord, TradeLedger,
};

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), Just(0.5), 0.0..=1.0f64]
}

fn state_from(cells: u32, dim: usize, kernel: KernelMode, steps: &[(Vec<f64>, f64)]) -> ForecasterState {
    let mut s = ForecasterState::new(PartitionGrid::new(cells).unwrap(), dim, kernel).unwrap();
    for (x, o) in steps {
        let p = s.solve(&x[..dim]).unwrap();
        s.update(p, &x[..dim], *o).unwrap();
    }
    s
}

fn history() -> impl Strategy<Value = Vec<(Vec<f64>, f64)>> {
    prop::collection::vec((prop::collection::vec(unit(), 2), unit()), 0..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weights_normalize_and_interpolate(v in unit(), cells in 1u32..64) {
        let g = PartitionGrid::new(cells).unwrap();
        let w = rounding_weights(v, &g).unwrap();
        let total: f64 = w.support().map(|(_, u)| u).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let mean: f64 = w.support().map(|(i, u)| u * g.endpoint(i)).sum();
        prop_assert!((mean - v).abs() < 1e-12);
        prop_assert!(w.variance(&g) <= g.delta() * g.delta() / 4.0 + 1e-15);
    }

    #[test]
    fn joint_weights_sum_to_one(p in unit(), x in prop::collection::vec(unit(), 0..4), cells in 1u32..20) {
        let g = PartitionGrid::new(cells).unwrap();
        let j = joint_weights(&ForecastPoint::new(p, x.clone()), &g).unwrap();
        prop_assert!((j.total() - 1.0).abs() < 1e-12);
        prop_assert!(j.len() <= 1 << (x.len() + 1));
    }

    #[test]
    fn randomized_point_lands_on_support(p in unit(), x in prop::collection::vec(unit(), 0..3), seed in any::<u64>()) {
        let g = PartitionGrid::new(10).unwrap();
        let r = randomize_point(p, &x, &g, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!((r.p - p).abs() <= g.delta() + 1e-12);
        prop_assert_eq!(r.p, g.endpoint(r.p_index));
        for (a, b) in r.x.iter().zip(&x) {
            prop_assert!((a - b).abs() <= g.delta() + 1e-12);
        }
    }

    #[test]
    fn kernel_symmetric_and_bounded(a in unit(), b in unit(), xa in unit(), xb in unit(), cosine in any::<bool>()) {
        let g = PartitionGrid::new(8).unwrap();
        let mode = if cosine { KernelMode::Cosine } else { KernelMode::Grid };
        let (qa, qb) = (ForecastPoint::new(a, vec![xa]), ForecastPoint::new(b, vec![xb]));
        let ab = kernel_eval(&qa, &qb, &g, mode).unwrap();
        let ba = kernel_eval(&qb, &qa, &g, mode).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
        let aa = kernel_eval(&qa, &qa, &g, mode).unwrap();
        let bb = kernel_eval(&qb, &qb, &g, mode).unwrap();
        prop_assert!(ab * ab <= aa * bb + 1e-12);
    }

    #[test]
    fn energy_bounded_by_steps(h in history(), cells in 1u32..12) {
        let s = state_from(cells, 2, KernelMode::Grid, &h);
        prop_assert!(s.energy() <= h.len() as f64 + 1e-9);
    }

    #[test]
    fn solve_is_a_root_or_boundary(h in history(), x in prop::collection::vec(unit(), 1), cells in 1u32..12) {
        let s = state_from(cells, 1, KernelMode::Grid, &h);
        let p = s.solve(&x).unwrap();
        let nodes = s.node_scores(&x).unwrap();
        let at = s.score(p, &x).unwrap();
        let boundary = (p == 1.0 && nodes.iter().all(|&m| m > 0.0)) || (p == 0.0 && nodes.iter().all(|&m| m < 0.0));
        prop_assert!(at.abs() <= 1e-9 || boundary, "score({p}) = {at}");
    }

    #[test]
    fn replay_on_same_grid_is_identity(h in history(), cells in 1u32..12) {
        let s = state_from(cells, 1, KernelMode::Grid, &h);
        let r = s.replay(*s.grid(), 0).unwrap();
        let a: Vec<_> = s.accumulators().collect();
        let b: Vec<_> = r.accumulators().collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rescale_round_trips(raw in prop::collection::vec(100.0..200.0f64, 1..50)) {
        let series = PriceSeries::from_values(raw.clone()).unwrap();
        let s = rescale(&series, ScaleMode::Strict, 100.0, 200.0).unwrap();
        prop_assert_eq!(s.scaled.len(), raw.len() + 1);
        for (v, r) in s.scaled[1..].iter().zip(&raw) {
            prop_assert!((0.0..=1.0).contains(v));
            prop_assert!((s.unscale(*v) - r).abs() < 1e-9);
        }
    }

    #[test]
    fn limited_risk_capital_stays_positive(
        path in prop::collection::vec((any::<bool>(), unit()), 1..200),
        delta in 0.0..0.99f64,
    ) {
        let mut ledger = TradeLedger::new(1.0);
        let mut prev = 0.5;
        for (e, now) in path {
            limited_risk_step(&mut ledger, e, prev, now, delta).unwrap();
            prev = now;
        }
        prop_assert!(ledger.capital() > 0.0);
        prop_assert!(ledger.capital() >= (1.0 - delta).powi(ledger.entry_count() as i32) * (1.0 - 1e-12));
    }

    #[test]
    fn decomposition_matches_total(recs in prop::collection::vec((any::<bool>(), unit(), unit(), unit(), unit()), 0..100)) {
        let recs: Vec<DecisionRecord> = recs
            .into_iter()
            .map(|(entered, p_tilde, s_tilde_prev, s_prev, s_now)| DecisionRecord { entered, p_tilde, s_tilde_prev, s_prev, s_now })
            .collect();
        let d = gain_decomposition(&recs);
        prop_assert!((d.total() - simple_total_gain(&recs)).abs() < 1e-12);
    }

    #[test]
    fn aggregate_weights_are_distributions(
        rows in prop::collection::vec(prop::collection::vec(-0.5..0.5f64, 5), 1..6),
        eta in 0.01..50.0f64,
    ) {
        let a = aggregate_strategies(&rows, eta).unwrap();
        prop_assert_eq!(a.weights.len(), 6);
        for w in &a.weights {
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(w.iter().all(|&u| u >= 0.0));
        }
        for (t, r) in a.returns.iter().enumerate() {
            let lo = rows.iter().map(|s| s[t]).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|s| s[t]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(*r >= lo - 1e-12 && *r <= hi + 1e-12);
        }
    }
}
