use dse_core::merge::{
    wasserstein_1d, wasserstein_barycenter, wasserstein_barycenter_on_grid, EmpiricalPosterior, WassersteinOrder,
};
use proptest::collection::vec;
use proptest::prelude::*;

const ORDERS: [WassersteinOrder; 2] = [WassersteinOrder::One, WassersteinOrder::Two];

fn post(x: &[f64]) -> EmpiricalPosterior {
    EmpiricalPosterior::new(x.to_vec()).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum-cost perfect matching by exhaustive search.
fn assignment_cost(a: &[f64], b: &[f64], order: WassersteinOrder) -> f64 {
    let n = a.len() as f64;
    permutations(a.len())
        .iter()
        .map(|p| {
            let s: f64 = p
                .iter()
                .enumerate()
                .map(|(i, &j)| match order {
                    WassersteinOrder::One => (a[i] - b[j]).abs(),
                    WassersteinOrder::Two => (a[i] - b[j]).powi(2),
                })
                .sum();
            match order {
                WassersteinOrder::One => s / n,
                WassersteinOrder::Two => (s / n).sqrt(),
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// ∫ |F_a - F_b| dx over the merged support.
fn w1_by_cdf(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |x: &[f64], t: f64| x.iter().filter(|&&v| v <= t).count() as f64 / x.len() as f64;
    let mut pts: Vec<f64> = a.iter().chain(b).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.windows(2)
        .map(|w| (cdf(a, w[0]) - cdf(b, w[0])).abs() * (w[1] - w[0]))
        .sum()
}

fn sized_pair(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max).prop_flat_map(|n| (vec(-50.0f64..50.0, n), vec(-50.0f64..50.0, n)))
}

proptest! {
    #[test]
    fn matches_exhaustive_assignment((a, b) in sized_pair(6)) {
        for order in ORDERS {
            let w = wasserstein_1d(&post(&a), &post(&b), order);
            prop_assert!((w - assignment_cost(&a, &b, order)).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_is_exact_when_sizes_nest(a in vec(-10.0f64..10.0, 1..6), k in 1usize..4, seed in vec(-10.0f64..10.0, 15)) {
        let b: Vec<f64> = seed.into_iter().take(a.len() * k).collect();
        prop_assume!(b.len() == a.len() * k);
        let w = wasserstein_1d(&post(&a), &post(&b), WassersteinOrder::One);
        prop_assert!((w - w1_by_cdf(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn metric_axioms(
        (a, b) in sized_pair(12),
        c in vec(-50.0f64..50.0, 12),
    ) {
        let c = &c[..a.len()];
        let (pa, pb, pc) = (post(&a), post(&b), post(c));
        for order in ORDERS {
            let ab = wasserstein_1d(&pa, &pb, order);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, wasserstein_1d(&pb, &pa, order));
            prop_assert_eq!(wasserstein_1d(&pa, &pa, order), 0.0);
            let via = wasserstein_1d(&pa, &pc, order) + wasserstein_1d(&pc, &pb, order);
            prop_assert!(ab <= via + 1e-12);
        }
    }

    #[test]
    fn translation_costs_the_shift(a in vec(-50.0f64..50.0, 1..30), shift in -20.0f64..20.0) {
        let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
        for order in ORDERS {
            let w = wasserstein_1d(&post(&a), &post(&b), order);
            prop_assert!((w - shift.abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn barycenter_of_translates_is_midway(a in vec(-5.0f64..5.0, 1..200), shift in -3.0f64..3.0) {
        let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let bar = wasserstein_barycenter_on_grid(&[post(&a), post(&b)], None, 512).unwrap();
        let base = wasserstein_barycenter_on_grid(&[post(&a)], None, 512).unwrap();
        for (x, y) in bar.samples().iter().zip(base.samples()) {
            prop_assert!((x - y - shift / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn barycenter_minimises_weighted_cost(
        a in vec(-5.0f64..5.0, 64),
        b in vec(-5.0f64..5.0, 64),
        w in 0.05f64..0.95,
        delta in prop_oneof![-0.5f64..-0.01, 0.01f64..0.5],
        scale in prop_oneof![0.5f64..0.99, 1.01f64..1.5],
    ) {
        let (pa, pb) = (post(&a), post(&b));
        let bar = wasserstein_barycenter_on_grid(&[pa.clone(), pb.clone()], Some(&[w, 1.0 - w]), 64).unwrap();
        let cost = |c: &EmpiricalPosterior| {
            w * wasserstein_1d(c, &pa, WassersteinOrder::Two).powi(2)
                + (1.0 - w) * wasserstein_1d(c, &pb, WassersteinOrder::Two).powi(2)
        };
        let best = cost(&bar);
        let m = bar.mean();
        let shifted = post(&bar.samples().iter().map(|x| x + delta).collect::<Vec<_>>());
        let spread = post(&bar.samples().iter().map(|x| m + scale * (x - m)).collect::<Vec<_>>());
        prop_assert!(best <= cost(&shifted) + 1e-12);
        prop_assert!(best <= cost(&spread) + 1e-12);
    }
}

#[test]
fn barycenter_mean_averages_locations() {
    let a: Vec<f64> = (0..1000).map(|i| ((i as f64 + 0.5) / 1000.0).ln()).collect();
    let b: Vec<f64> = a.iter().map(|x| x + 4.0).collect();
    let bar = wasserstein_barycenter(&[post(&a), post(&b)], None).unwrap();
    let mid = (post(&a).mean() + post(&b).mean()) / 2.0;
    assert!((bar.mean() - mid).abs() < 1.0 / 4096.0 * 10.0);
}
