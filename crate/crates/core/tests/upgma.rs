#![allow(clippy::needless_range_loop)]

use dse_core::cluster::{to_newick, upgma, DistanceMatrix};
use proptest::prelude::*;

/// Textbook average linkage: cluster distance is recomputed from scratch as
/// the mean of all original leaf-to-leaf distances.
fn naive_heights(d: &[Vec<f64>]) -> Vec<f64> {
    let mut clusters: Vec<Vec<usize>> = (0..d.len()).map(|i| vec![i]).collect();
    let mut heights = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        s += d[i][j];
                    }
                }
                let avg = s / (clusters[a].len() * clusters[b].len()) as f64;
                if avg < best.0 {
                    best = (avg, a, b);
                }
            }
        }
        let (h, a, b) = best;
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        heights.push(h);
    }
    heights
}

fn symmetric(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(0.01f64..10.0, n * (n - 1) / 2).prop_map(move |upper| {
        let mut d = vec![vec![0.0; n]; n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                d[i][j] = upper[k];
                d[j][i] = upper[k];
                k += 1;
            }
        }
        d
    })
}

fn labelled(d: Vec<Vec<f64>>) -> DistanceMatrix {
    let labels = (0..d.len()).map(|i| format!("e{i}")).collect();
    DistanceMatrix::new(labels, d).unwrap()
}

proptest! {
    #[test]
    fn heights_match_naive_reference(d in symmetric(6)) {
        let tree = upgma(&labelled(d.clone())).unwrap();
        let got: Vec<f64> = tree.merges.iter().map(|m| m.height).collect();
        let want = naive_heights(&d);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn heights_are_monotone_and_cophenetic_is_ultrametric(d in symmetric(7)) {
        let tree = upgma(&labelled(d)).unwrap();
        for w in tree.merges.windows(2) {
            prop_assert!(w[0].height <= w[1].height + 1e-12);
        }
        let c = tree.cophenetic();
        for i in 0..7 {
            for j in 0..7 {
                for k in 0..7 {
                    prop_assert!(c[i][k] <= c[i][j].max(c[j][k]) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn relabelling_permutes_the_tree(d in symmetric(6), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let tree = upgma(&labelled(d.clone())).unwrap();
        let labels: Vec<String> = perm.iter().map(|&p| format!("e{p}")).collect();
        let pd: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&j| d[i][j]).collect()).collect();
        let ptree = upgma(&DistanceMatrix::new(labels, pd).unwrap()).unwrap();
        for (a, b) in tree.merges.iter().zip(&ptree.merges) {
            prop_assert!((a.height - b.height).abs() < 1e-12);
        }
        let (c, pc) = (tree.cophenetic(), ptree.cophenetic());
        for i in 0..6 {
            for j in 0..6 {
                prop_assert!((pc[i][j] - c[perm[i]][perm[j]]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn newick_branch_lengths_are_ultrametric() {
    let d = vec![
        vec![0.0, 2.0, 6.0, 10.0],
        vec![2.0, 0.0, 6.0, 10.0],
        vec![6.0, 6.0, 0.0, 10.0],
        vec![10.0, 10.0, 10.0, 0.0],
    ];
    let tree = upgma(&labelled(d)).unwrap();
    assert_eq!(to_newick(&tree), "(((e0:1,e1:1):2,e2:3):2,e3:5);");
}
