//! Clustering entities by Wasserstein distance between their posteriors.

use std::collections::HashSet;

use thiserror::Error;

use crate::merge::{wasserstein_1d, EmpiricalPosterior, WassersteinOrder};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("need at least 2 entities, got {0}")]
    TooFew(usize),
    #[error("invalid distance matrix: {0}")]
    Invalid(String),
    #[error("non-finite distance between `{0}` and `{1}`")]
    NonFinite(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, ClusterError> {
        let n = labels.len();
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(ClusterError::DuplicateLabel(l.clone()));
            }
        }
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(ClusterError::Invalid(format!("expected {n}x{n} values")));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return Err(ClusterError::Invalid(format!("nonzero diagonal at `{}`", labels[i])));
            }
            for j in 0..i {
                let (a, b) = (values[i][j], values[j][i]);
                if a < 0.0 || b < 0.0 {
                    return Err(ClusterError::Invalid("negative distance".into()));
                }
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(ClusterError::Invalid(format!(
                        "asymmetric entry `{}`/`{}`",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Pairwise W_p between named posteriors, one evaluation per unordered pair.
pub fn posterior_distance_matrix(
    posteriors: &[(String, EmpiricalPosterior)],
    order: WassersteinOrder,
) -> Result<DistanceMatrix, ClusterError> {
    let n = posteriors.len();
    if n < 2 {
        return Err(ClusterError::TooFew(n));
    }
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = wasserstein_1d(&posteriors[i].1, &posteriors[j].1, order);
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    DistanceMatrix::new(posteriors.iter().map(|(l, _)| l.clone()).collect(), values)
}

/// One agglomeration step. Leaves are nodes `0..n`; the k-th merge creates node `n + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub node: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.labels.len()
    }

    fn height(&self, node: usize) -> f64 {
        if node < self.n_leaves() {
            0.0
        } else {
            self.merges[node - self.n_leaves()].height
        }
    }

    fn node_name(&self, node: usize) -> String {
        if node < self.n_leaves() {
            self.labels[node].clone()
        } else {
            format!("merge{}", node - self.n_leaves() + 1)
        }
    }

    fn leaves_under(&self, node: usize, out: &mut Vec<usize>) {
        if node < self.n_leaves() {
            out.push(node);
        } else {
            let m = &self.merges[node - self.n_leaves()];
            self.leaves_under(m.left, out);
            self.leaves_under(m.right, out);
        }
    }

    /// Height at which each pair of leaves first shares a cluster.
    pub fn cophenetic(&self) -> Vec<Vec<f64>> {
        let n = self.n_leaves();
        let mut c = vec![vec![0.0; n]; n];
        for m in &self.merges {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            self.leaves_under(m.left, &mut a);
            self.leaves_under(m.right, &mut b);
            for &i in &a {
                for &j in &b {
                    c[i][j] = m.height;
                    c[j][i] = m.height;
                }
            }
        }
        c
    }

    /// `left,right,height` table; internal nodes are named `merge<k>`.
    pub fn merge_table(&self) -> String {
        let mut out = String::from("left,right,height\n");
        for m in &self.merges {
            out.push_str(&format!(
                "{},{},{}\n",
                csv_field(&self.node_name(m.left)),
                csv_field(&self.node_name(m.right)),
                m.height
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Average-linkage agglomeration. The closest pair of active clusters merges
/// first (ties: lowest row, then lowest column); the merged cluster takes the
/// lower slot and its distance to any other cluster is the size-weighted mean
/// of its parts' distances.
pub fn upgma(dm: &DistanceMatrix) -> Result<Dendrogram, ClusterError> {
    let n = dm.len();
    if n < 2 {
        return Err(ClusterError::TooFew(n));
    }
    for i in 0..n {
        for j in 0..n {
            if !dm.get(i, j).is_finite() {
                return Err(ClusterError::NonFinite(dm.labels[i].clone(), dm.labels[j].clone()));
            }
        }
    }
    let mut d = dm.values.clone();
    let mut node: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if best.is_none_or(|(bi, bj)| d[i][j] < d[bi][bj]) {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("two active clusters");
        let (si, sj) = (size[i] as f64, size[j] as f64);
        for k in (0..n).filter(|&k| active[k] && k != i && k != j) {
            let v = (si * d[i][k] + sj * d[j][k]) / (si + sj);
            d[i][k] = v;
            d[k][i] = v;
        }
        let new_node = n + step;
        merges.push(Merge {
            left: node[i],
            right: node[j],
            height: d[i][j],
            node: new_node,
            size: size[i] + size[j],
        });
        node[i] = new_node;
        size[i] += size[j];
        active[j] = false;
    }
    Ok(Dendrogram {
        labels: dm.labels.clone(),
        merges,
    })
}

fn newick_label(s: &str) -> String {
    let needs_quotes = s.is_empty() || s.chars().any(|c| c.is_whitespace() || "()[]':;,".contains(c));
    if needs_quotes {
        format!("'{}'", s.replace('\'', "''"))
    } else {
        s.to_string()
    }
}

/// Ultrametric Newick: every leaf sits at half the root height below the root.
pub fn to_newick(tree: &Dendrogram) -> String {
    fn write(tree: &Dendrogram, node: usize, out: &mut String) {
        if node < tree.n_leaves() {
            out.push_str(&newick_label(&tree.labels[node]));
            return;
        }
        let m = &tree.merges[node - tree.n_leaves()];
        out.push('(');
        for (k, child) in [m.left, m.right].into_iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write(tree, child, out);
            let len = m.height / 2.0 - tree.height(child) / 2.0;
            out.push_str(&format!(":{len}"));
        }
        out.push(')');
    }
    let mut out = String::new();
    match tree.merges.last() {
        Some(root) => write(tree, root.node, &mut out),
        None => {
            if let Some(l) = tree.labels.first() {
                out.push_str(&newick_label(l));
            }
        }
    }
    out.push(';');
    out
}

/// Matrix as delimited text with a header row and a label column.
pub fn format_distance_matrix(dm: &DistanceMatrix) -> String {
    let mut out = String::from("label");
    for l in &dm.labels {
        out.push(',');
        out.push_str(&csv_field(l));
    }
    out.push('\n');
    for (l, row) in dm.labels.iter().zip(&dm.values) {
        out.push_str(&csv_field(l));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(labels: &[&str], v: Vec<Vec<f64>>) -> DistanceMatrix {
        DistanceMatrix::new(labels.iter().map(|s| s.to_string()).collect(), v).unwrap()
    }

    fn point(x: f64) -> EmpiricalPosterior {
        EmpiricalPosterior::new(vec![x; 10]).unwrap()
    }

    #[test]
    fn point_mass_distances() {
        let posts = vec![
            ("a".to_string(), point(0.0)),
            ("b".into(), point(1.0)),
            ("c".into(), point(3.0)),
        ];
        let m = posterior_distance_matrix(&posts, WassersteinOrder::One).unwrap();
        assert_eq!(
            m.rows(),
            &[vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 2.0], vec![3.0, 2.0, 0.0]]
        );
    }

    #[test]
    fn identical_posteriors_are_at_zero() {
        let posts = vec![("a".to_string(), point(0.4)), ("b".into(), point(0.4))];
        let m = posterior_distance_matrix(&posts, WassersteinOrder::Two).unwrap();
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn label_errors() {
        let posts = vec![("a".to_string(), point(0.0)), ("a".into(), point(1.0))];
        assert_eq!(
            posterior_distance_matrix(&posts, WassersteinOrder::One),
            Err(ClusterError::DuplicateLabel("a".into()))
        );
        assert_eq!(
            posterior_distance_matrix(&posts[..1], WassersteinOrder::One),
            Err(ClusterError::TooFew(1))
        );
    }

    #[test]
    fn matrix_validation() {
        let l = vec!["a".to_string(), "b".to_string()];
        assert!(DistanceMatrix::new(l.clone(), vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::new(l.clone(), vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(DistanceMatrix::new(l, vec![vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn two_leaves() {
        let t = upgma(&dm(&["A", "B"], vec![vec![0.0, 2.0], vec![2.0, 0.0]])).unwrap();
        assert_eq!(t.merges.len(), 1);
        assert_eq!(t.merges[0].height, 2.0);
        assert_eq!(to_newick(&t), "(A:1,B:1);");
    }

    #[test]
    fn three_leaf_examples() {
        let t = upgma(&dm(
            &["A", "B", "C"],
            vec![vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 4.0], vec![4.0, 4.0, 0.0]],
        ))
        .unwrap();
        let h: Vec<f64> = t.merges.iter().map(|m| m.height).collect();
        assert_eq!(h, vec![1.0, 4.0]);
        assert_eq!((t.merges[0].left, t.merges[0].right), (0, 1));
        assert_eq!(to_newick(&t), "((A:0.5,B:0.5):1.5,C:2);");
        assert_eq!(t.merge_table(), "left,right,height\nA,B,1\nmerge1,C,4\n");

        let t = upgma(&dm(
            &["A", "B", "C"],
            vec![vec![0.0, 2.0, 5.0], vec![2.0, 0.0, 3.0], vec![5.0, 3.0, 0.0]],
        ))
        .unwrap();
        let h: Vec<f64> = t.merges.iter().map(|m| m.height).collect();
        assert_eq!(h, vec![2.0, 4.0]);
    }

    #[test]
    fn ties_break_on_lowest_pair() {
        let t = upgma(&dm(
            &["A", "B", "C"],
            vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]],
        ))
        .unwrap();
        assert_eq!((t.merges[0].left, t.merges[0].right), (0, 1));
    }

    #[test]
    fn rejects_non_finite() {
        let m = dm(&["A", "B"], vec![vec![0.0, f64::INFINITY], vec![f64::INFINITY, 0.0]]);
        assert!(matches!(upgma(&m), Err(ClusterError::NonFinite(..))));
    }

    #[test]
    fn newick_quotes_labels() {
        let t = upgma(&dm(&["Smith, J", "O'Neal"], vec![vec![0.0, 2.0], vec![2.0, 0.0]])).unwrap();
        assert_eq!(to_newick(&t), "('Smith, J':1,'O''Neal':1);");
    }

    #[test]
    fn cophenetic_of_three_leaves() {
        let t = upgma(&dm(
            &["A", "B", "C"],
            vec![vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 4.0], vec![4.0, 4.0, 0.0]],
        ))
        .unwrap();
        assert_eq!(
            t.cophenetic(),
            vec![vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 4.0], vec![4.0, 4.0, 0.0]]
        );
    }

    #[test]
    fn distance_matrix_text() {
        let m = dm(&["A", "B"], vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert_eq!(format_distance_matrix(&m), "label,A,B\nA,0,0.5\nB,0.5,0\n");
    }
}
