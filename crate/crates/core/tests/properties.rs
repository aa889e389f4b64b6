use std::collections::{HashSet, VecDeque};

use proptest::prelude::*;
use rand::SeedableRng;

use bsfl::environment::{iteration_latency, realized_reward};
use bsfl::fedtoy::aggregate;
use bsfl::generalization::GeneralizationSpec;
use bsfl::optimizer::{
    anneal, is_lightweight_neighbor, neighbors_classic, neighbors_lightweight, solve_exhaustive, AnnealerConfig,
    Neighborhood, ScoreTable,
};
use bsfl::policies::random_uniform_select;
use bsfl::rng::SimRng;
use bsfl::{speed_of, Energy, SelectionHistory, SelectionSet, SystemParams};

fn params(k: usize, m: usize, alpha: f64) -> SystemParams {
    SystemParams {
        num_clients: k,
        num_channels: m,
        alpha,
        beta: 2,
        tau_min: 1.0,
        tau_max: 10.0,
        delta_min: 0.1,
        rng_seed: 0,
    }
}

fn subsets(k: usize, m: usize) -> Vec<SelectionSet> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << k) {
        if mask.count_ones() as usize == m {
            let members = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            out.push(SelectionSet::new(members, k).unwrap());
        }
    }
    out
}

fn table_strategy() -> impl Strategy<Value = ScoreTable> {
    (5usize..=8, 2usize..=3, 0.0f64..3.0).prop_flat_map(|(k, m, alpha)| {
        (
            prop::collection::vec(0.0f64..1.0, k),
            prop::collection::vec(-1.0f64..1.0, k),
        )
            .prop_map(move |(s, g)| ScoreTable::from_values(&s, &g, alpha, m).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn running_mean_equals_batch_mean(obs in prop::collection::vec((0usize..4, 0.5f64..12.0), 1..200)) {
        let p = params(4, 2, 1.0);
        let mut h = SelectionHistory::new(4);
        let mut seen: Vec<Vec<f64>> = vec![Vec::new(); 4];
        for &(k, lat) in &obs {
            h.record_observation(k, lat, &p).unwrap();
            seen[k].push(speed_of(lat, &p).unwrap());
        }
        for k in 0..4 {
            match h.mean_speed(k) {
                None => prop_assert!(seen[k].is_empty()),
                Some(m) => {
                    let batch = seen[k].iter().sum::<f64>() / seen[k].len() as f64;
                    prop_assert!((m - batch).abs() <= 1e-9);
                    prop_assert_eq!(h.count(k), seen[k].len() as u64);
                }
            }
        }
    }

    #[test]
    fn counters_sum_to_m_t(k in 2usize..12, mfrac in 0.0f64..1.0, rounds in 1u64..80, seed: u64) {
        let m = 1 + ((k - 1) as f64 * mfrac) as usize;
        let p = params(k, m, 1.0);
        let mut h = SelectionHistory::new(k);
        let mut rng = SimRng::seed_from_u64(seed);
        let all: Vec<usize> = (0..k).collect();
        for _ in 0..rounds {
            let s = random_uniform_select(&all, m, &mut rng).unwrap();
            h.record_round(&s, &vec![2.0; m], &p).unwrap();
        }
        prop_assert_eq!(h.counts().iter().sum::<u64>(), m as u64 * rounds);
        prop_assert_eq!(h.round(), rounds);
    }

    #[test]
    fn speed_monotone_and_saturating(a in 0.01f64..50.0, b in 0.01f64..50.0) {
        let p = params(2, 1, 0.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(speed_of(lo, &p).unwrap() >= speed_of(hi, &p).unwrap());
        if lo <= p.tau_min {
            prop_assert_eq!(speed_of(lo, &p).unwrap(), 1.0);
        }
        if hi >= p.tau_max {
            prop_assert_eq!(speed_of(hi, &p).unwrap(), p.tau_min / p.tau_max);
        }
    }

    #[test]
    fn energy_order_is_total(v in prop::collection::vec((any::<bool>(), -3.0f64..3.0, -1.0f64..1.0), 3)) {
        let e: Vec<Energy> = v
            .iter()
            .map(|&(inf, x, g)| if inf { Energy::UnobservedInfinite { g_term: g } } else { Energy::Finite { value: x + g, g_term: g } })
            .collect();
        for a in &e {
            prop_assert_eq!(a.cmp(a), std::cmp::Ordering::Equal);
            for b in &e {
                prop_assert_eq!(a.cmp(b), b.cmp(a).reverse());
                for c in &e {
                    if a <= b && b <= c {
                        prop_assert!(a <= c);
                    }
                }
            }
        }
    }

    #[test]
    fn reward_within_bounds(
        lat in prop::collection::vec(0.2f64..20.0, 3),
        counts in prop::collection::vec(0u64..30, 6),
        alpha in 0.0f64..4.0,
        beta in 1u32..5,
    ) {
        let p = SystemParams { beta, ..params(6, 3, alpha) };
        let g = GeneralizationSpec::iid_balanced(6, 3, beta).unwrap();
        let mut h = SelectionHistory::new(6);
        for (k, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                h.record_observation(k, 2.0, &p).unwrap();
            }
        }
        for _ in 0..30 {
            h.advance_round();
        }
        let chosen = SelectionSet::new(vec![0, 2, 5], 6).unwrap();
        let r = realized_reward(&lat, &chosen, &h, &g, &p).unwrap();
        prop_assert!(r >= p.tau_min / p.tau_max - alpha - 1e-12 && r <= 1.0 + alpha + 1e-12);
        let clipped: Vec<f64> = lat.iter().map(|&l| p.clip_latency(l)).collect();
        let plain = clipped.iter().copied().fold(f64::MIN, f64::max);
        prop_assert_eq!(iteration_latency(&clipped, &p).unwrap(), plain);
    }

    #[test]
    fn neighborhoods_contained_and_symmetric(table in table_strategy()) {
        let (k, m) = (table.available().len(), table.num_channels());
        let states = subsets(k, m);
        for s in &states {
            let classic: HashSet<SelectionSet> = neighbors_classic(s, &table).into_iter().collect();
            prop_assert_eq!(classic.len(), m * (k - m));
            for u in neighbors_lightweight(s, &table) {
                prop_assert!(classic.contains(&u));
                prop_assert!(neighbors_lightweight(&u, &table).contains(s));
                prop_assert!(is_lightweight_neighbor(s, &u, &table));
            }
        }
    }

    #[test]
    fn lightweight_graph_connected(table in table_strategy()) {
        let (k, m) = (table.available().len(), table.num_channels());
        let states = subsets(k, m);
        let mut seen: HashSet<SelectionSet> = HashSet::from([states[0].clone()]);
        let mut queue = VecDeque::from([states[0].clone()]);
        while let Some(s) = queue.pop_front() {
            for u in neighbors_lightweight(&s, &table) {
                if seen.insert(u.clone()) {
                    queue.push_back(u);
                }
            }
        }
        prop_assert_eq!(seen.len(), states.len());
    }

    #[test]
    fn annealers_never_beat_exhaustive(table in table_strategy(), seed: u64, steps in 1u64..400) {
        let (_, best) = solve_exhaustive(&table, 1_000_000).unwrap();
        for nb in [Neighborhood::Classic, Neighborhood::Lightweight] {
            let r = anneal(&table, &AnnealerConfig::new(steps, nb), &mut SimRng::seed_from_u64(seed)).unwrap();
            prop_assert!(r.best_energy <= best);
            prop_assert_eq!(table.energy(&r.best), r.best_energy);
        }
    }

    #[test]
    fn g_shift_keeps_argmax(
        s in prop::collection::vec(0.0f64..1.0, 7),
        g in prop::collection::vec(-0.5f64..0.5, 7),
        shift in -0.5f64..0.5,
    ) {
        let a = ScoreTable::from_values(&s, &g, 1.5, 3).unwrap();
        let shifted: Vec<f64> = g.iter().map(|x| x + shift).collect();
        let b = ScoreTable::from_values(&s, &shifted, 1.5, 3).unwrap();
        let (sa, ea) = solve_exhaustive(&a, 1000).unwrap();
        let (sb, eb) = solve_exhaustive(&b, 1000).unwrap();
        prop_assert_eq!(sa, sb);
        prop_assert!((eb.as_f64() - ea.as_f64() - 1.5 * shift).abs() < 1e-12);
    }

    #[test]
    fn aggregation_ignores_order(
        locals in prop::collection::vec((prop::collection::vec(-5.0f64..5.0, 4), 1u64..500), 1..8),
        seed: u64,
    ) {
        let (w, n): (Vec<Vec<f64>>, Vec<u64>) = locals.iter().cloned().unzip();
        let mut idx: Vec<usize> = (0..w.len()).collect();
        let mut rng = SimRng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
        let w2: Vec<Vec<f64>> = idx.iter().map(|&i| w[i].clone()).collect();
        let n2: Vec<u64> = idx.iter().map(|&i| n[i]).collect();
        let a = aggregate(&w, &n).unwrap();
        let b = aggregate(&w2, &n2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn g_odd_signed_bounded(k in 2usize..40, mfrac in 0.0f64..1.0, beta in 1u32..9, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let m = 1 + ((k - 1) as f64 * mfrac) as usize;
        let g = GeneralizationSpec::iid_balanced(k, m, beta).unwrap();
        let target = m as f64 / k as f64;
        let delta = x * target.min(1.0 - target);
        prop_assert!((g.value_at_rate(0, target + delta) + g.value_at_rate(0, target - delta)).abs() <= 1e-12);
        let v = g.value_at_rate(0, y);
        prop_assert!((-1.0..=1.0).contains(&v));
        if y < target {
            prop_assert!(v > 0.0 || (target - y).powi(beta as i32) == 0.0);
        } else if y > target {
            prop_assert!(v < 0.0 || (y - target).powi(beta as i32) == 0.0);
        } else {
            prop_assert_eq!(v, 0.0);
        }
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        prop_assert!(g.value_at_rate(0, lo) >= g.value_at_rate(0, hi));
    }
}

#[test]
fn genie_without_bonus_is_stationary() {
    use bsfl::policies::genie_select;
    let mu = [0.9, 0.4, 0.7, 0.2, 0.8];
    let p = params(5, 2, 0.0);
    let g = GeneralizationSpec::iid_balanced(5, 2, 2).unwrap();
    let mut h = SelectionHistory::new(5);
    let mut rng = SimRng::seed_from_u64(1);
    let all: Vec<usize> = (0..5).collect();
    let first = genie_select(&mu, &h, &g, 0.0, 2, &all, 1000).unwrap().0;
    for _ in 0..50 {
        let s = random_uniform_select(&all, 2, &mut rng).unwrap();
        h.record_round(&s, &[3.0, 3.0], &p).unwrap();
        assert_eq!(genie_select(&mu, &h, &g, 0.0, 2, &all, 1000).unwrap().0, first);
    }
}
