//! Divide-and-conquer estimation of the minute-level model.
//!
//! A season is split into contiguous blocks of games, each block is fitted
//! independently, and every scalar parameter's block posteriors are combined
//! into one barycentric posterior. In one dimension the order-2 Wasserstein
//! barycenter has as quantile function the weighted average of the input
//! quantile functions, which is what [`wasserstein_barycenter`] computes on a
//! grid of equiprobable levels.

use std::fmt;
use std::ops::Range;

use rayon::prelude::*;
use thiserror::Error;

use crate::data::MinuteSeries;
use crate::inference::{fit_minute_model, Fit, InferenceError, McmcConfig, PriorSpec};

/// Quantile levels used for barycenters, at (i - 0.5) / M.
pub const BARYCENTER_GRID: usize = 4096;

/// Smallest season the default four-block partition accepts.
pub const DEFAULT_PARTITION_MIN_GAMES: usize = 63;

#[derive(Debug, Error)]
pub enum MergeError {
    #[error(
        "default partition needs at least {DEFAULT_PARTITION_MIN_GAMES} games, got {0}; supply a custom partition"
    )]
    TooFewGames(usize),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("empty sample set")]
    Empty,
    #[error("non-finite sample {0}")]
    NonFinite(f64),
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("block {block}: {source}")]
    Block {
        block: usize,
        #[source]
        source: InferenceError,
    },
    #[error("{0}")]
    Inference(#[from] InferenceError),
}

/// Contiguous, disjoint blocks of 0-based game indices covering a season.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GamePartition {
    blocks: Vec<Range<usize>>,
}

impl GamePartition {
    /// Validate blocks against a season of `n_games`.
    pub fn new(blocks: Vec<Range<usize>>, n_games: usize) -> Result<Self, MergeError> {
        if blocks.is_empty() {
            return Err(MergeError::Partition("no blocks".into()));
        }
        let mut next = 0;
        for b in &blocks {
            if b.start != next {
                return Err(MergeError::Partition(format!(
                    "block starting at game {} leaves a gap or overlap (expected {})",
                    b.start + 1,
                    next + 1
                )));
            }
            if b.is_empty() {
                return Err(MergeError::Partition(format!("empty block at game {}", b.start + 1)));
            }
            next = b.end;
        }
        if next != n_games {
            return Err(MergeError::Partition(format!(
                "blocks end at game {next}, season has {n_games}"
            )));
        }
        Ok(Self { blocks })
    }

    /// Parse 1-based inclusive ranges, e.g. `1-41,42-82`.
    pub fn parse(spec: &str, n_games: usize) -> Result<Self, MergeError> {
        let bad = |s: &str| MergeError::Partition(format!("cannot parse block `{s}`"));
        let blocks = spec
            .split(',')
            .map(|part| {
                let part = part.trim();
                let (a, b) = part.split_once('-').ok_or_else(|| bad(part))?;
                let a: usize = a.trim().parse().map_err(|_| bad(part))?;
                let b: usize = b.trim().parse().map_err(|_| bad(part))?;
                if a == 0 || b < a {
                    return Err(bad(part));
                }
                Ok(a - 1..b)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(blocks, n_games)
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

impl fmt::Display for GamePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}-{}", b.start + 1, b.end)?;
        }
        Ok(())
    }
}

/// Games 1-21, 22-42, 43-62 and 63-N.
pub fn default_partition(n_games: usize) -> Result<GamePartition, MergeError> {
    if n_games < DEFAULT_PARTITION_MIN_GAMES {
        return Err(MergeError::TooFewGames(n_games));
    }
    GamePartition::new(vec![0..21, 21..42, 42..62, 62..n_games], n_games)
}

/// Draws of one scalar parameter, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPosterior {
    samples: Vec<f64>,
}

impl EmpiricalPosterior {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, MergeError> {
        if samples.is_empty() {
            return Err(MergeError::Empty);
        }
        if let Some(&x) = samples.iter().find(|x| !x.is_finite()) {
            return Err(MergeError::NonFinite(x));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Left-continuous inverse of the empirical CDF at level `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.samples.len();
        let k = (u * n as f64).ceil() as usize;
        self.samples[k.clamp(1, n) - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WassersteinOrder {
    #[default]
    One,
    Two,
}

impl WassersteinOrder {
    pub fn from_int(p: u32) -> Option<Self> {
        match p {
            1 => Some(Self::One),
            2 => Some(Self::Two),
            _ => None,
        }
    }
}

fn midpoint(i: usize, m: usize) -> f64 {
    (i as f64 + 0.5) / m as f64
}

/// W_p between two empirical distributions. Equal sample counts match sorted
/// samples one-to-one; otherwise both quantile functions are evaluated on
/// max(n_a, n_b) equiprobable levels.
pub fn wasserstein_1d(a: &EmpiricalPosterior, b: &EmpiricalPosterior, order: WassersteinOrder) -> f64 {
    let m = a.len().max(b.len());
    let pairs: Box<dyn Iterator<Item = (f64, f64)>> = if a.len() == b.len() {
        Box::new(a.samples.iter().copied().zip(b.samples.iter().copied()))
    } else {
        Box::new((0..m).map(|i| {
            let u = midpoint(i, m);
            (a.quantile(u), b.quantile(u))
        }))
    };
    match order {
        WassersteinOrder::One => pairs.map(|(x, y)| (x - y).abs()).sum::<f64>() / m as f64,
        WassersteinOrder::Two => (pairs.map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / m as f64).sqrt(),
    }
}

/// Order-2 barycenter on the default grid. `weights` defaults to uniform.
pub fn wasserstein_barycenter(
    posteriors: &[EmpiricalPosterior],
    weights: Option<&[f64]>,
) -> Result<EmpiricalPosterior, MergeError> {
    wasserstein_barycenter_on_grid(posteriors, weights, BARYCENTER_GRID)
}

pub fn wasserstein_barycenter_on_grid(
    posteriors: &[EmpiricalPosterior],
    weights: Option<&[f64]>,
    grid: usize,
) -> Result<EmpiricalPosterior, MergeError> {
    if posteriors.is_empty() || grid == 0 {
        return Err(MergeError::Empty);
    }
    let k = posteriors.len();
    let uniform = vec![1.0 / k as f64; k];
    let w = weights.unwrap_or(&uniform);
    if w.len() != k {
        return Err(MergeError::Weights(format!("{} weights for {k} posteriors", w.len())));
    }
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(MergeError::Weights("weights must be nonnegative and sum to 1".into()));
    }
    let samples = (0..grid)
        .map(|i| {
            let u = midpoint(i, grid);
            posteriors.iter().zip(w).map(|(p, wk)| wk * p.quantile(u)).sum()
        })
        .collect();
    EmpiricalPosterior::new(samples)
}

/// Per-block fits and the season-level barycentric posterior of each parameter.
#[derive(Debug, Clone)]
pub struct PartitionedFit {
    pub partition: GamePartition,
    pub blocks: Vec<Fit>,
    /// `(parameter name, barycentric posterior)` in parameter order.
    pub barycenters: Vec<(String, EmpiricalPosterior)>,
}

/// Seed of block `k` (0-based) for a run seeded with `seed`.
pub fn block_seed(seed: u64, k: usize) -> u64 {
    // splitmix64 step keeps block seeds well separated
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fit every block independently and merge marginals with uniform weights.
pub fn fit_partitioned_minute_model(
    y: &MinuteSeries,
    offsets: &[f64],
    partition: &GamePartition,
    priors: &PriorSpec,
    cfg: &McmcConfig,
    baseline: bool,
) -> Result<PartitionedFit, MergeError> {
    if offsets.len() != y.n_games() {
        return Err(MergeError::Inference(InferenceError::Dimension(format!(
            "{} offsets for {} games",
            offsets.len(),
            y.n_games()
        ))));
    }
    let last = partition.blocks().last().map_or(0, |b| b.end);
    if last != y.n_games() {
        return Err(MergeError::Partition(format!(
            "partition covers {last} games, series has {}",
            y.n_games()
        )));
    }
    let blocks: Vec<Fit> = partition
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(k, r)| {
            let sub = y.subset(r.clone());
            let block_cfg = McmcConfig {
                seed: block_seed(cfg.seed, k),
                ..cfg.clone()
            };
            fit_minute_model(&sub, &offsets[r.clone()], priors, &block_cfg, baseline)
                .map_err(|source| MergeError::Block { block: k + 1, source })
        })
        .collect::<Result<_, _>>()?;

    let names = blocks[0].draws.param_names.clone();
    let barycenters = names
        .iter()
        .map(|name| {
            let posts = blocks
                .iter()
                .map(|b| EmpiricalPosterior::new(b.draws.column(name)?))
                .collect::<Result<Vec<_>, MergeError>>()?;
            Ok((name.clone(), wasserstein_barycenter(&posts, None)?))
        })
        .collect::<Result<_, MergeError>>()?;
    Ok(PartitionedFit {
        partition: partition.clone(),
        blocks,
        barycenters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(v: &[f64]) -> EmpiricalPosterior {
        EmpiricalPosterior::new(v.to_vec()).unwrap()
    }

    #[test]
    fn default_partition_blocks() {
        let p = default_partition(82).unwrap();
        assert_eq!(p.blocks(), &[0..21, 21..42, 42..62, 62..82]);
        assert_eq!(p.to_string(), "1-21,22-42,43-62,63-82");
        assert_eq!(default_partition(76).unwrap().blocks()[3], 62..76);
        assert!(matches!(default_partition(62), Err(MergeError::TooFewGames(62))));
    }

    #[test]
    fn custom_partition_parsing() {
        let p = GamePartition::parse("1-41,42-82", 82).unwrap();
        assert_eq!(p.blocks(), &[0..41, 41..82]);
        assert!(GamePartition::parse("1-40,42-82", 82).is_err());
        assert!(GamePartition::parse("1-41,41-82", 82).is_err());
        assert!(GamePartition::parse("1-41", 82).is_err());
        assert!(GamePartition::parse("1-x", 82).is_err());
    }

    #[test]
    fn empirical_posterior_validation() {
        assert!(matches!(EmpiricalPosterior::new(vec![]), Err(MergeError::Empty)));
        assert!(EmpiricalPosterior::new(vec![1.0, f64::NAN]).is_err());
        assert_eq!(ep(&[3.0, 1.0, 2.0]).samples(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn distance_examples() {
        let a = ep(&[0.3, 1.2, 5.0]);
        assert_eq!(wasserstein_1d(&a, &a, WassersteinOrder::One), 0.0);
        for order in [WassersteinOrder::One, WassersteinOrder::Two] {
            assert_eq!(wasserstein_1d(&ep(&[0.0]), &ep(&[1.0]), order), 1.0);
        }
        assert_eq!(
            wasserstein_1d(&ep(&[0.0, 2.0]), &ep(&[1.0, 3.0]), WassersteinOrder::One),
            1.0
        );
    }

    #[test]
    fn unequal_counts_use_quantile_grid() {
        // Same distribution, different sample counts.
        let a = ep(&[0.0, 1.0]);
        let b = ep(&[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(wasserstein_1d(&a, &b, WassersteinOrder::One), 0.0);
        // {0} vs {0, 1}: half the mass moves by 1.
        assert_eq!(
            wasserstein_1d(&ep(&[0.0]), &ep(&[0.0, 1.0]), WassersteinOrder::One),
            0.5
        );
    }

    #[test]
    fn barycenter_of_point_masses() {
        let b = wasserstein_barycenter(&[ep(&[0.0]), ep(&[1.0])], None).unwrap();
        assert_eq!(b.len(), BARYCENTER_GRID);
        assert!(b.samples().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn barycenter_of_copies_is_resampled_input() {
        let a = ep(&[1.0, 2.0, 4.0, 8.0]);
        let b = wasserstein_barycenter(&[a.clone(), a.clone(), a.clone()], None).unwrap();
        assert!(wasserstein_1d(&a, &b, WassersteinOrder::One) < 1e-12);
    }

    #[test]
    fn barycenter_weight_validation() {
        let a = ep(&[1.0]);
        assert!(wasserstein_barycenter(&[], None).is_err());
        assert!(wasserstein_barycenter(&[a.clone(), a.clone()], Some(&[0.5])).is_err());
        assert!(wasserstein_barycenter(&[a.clone(), a.clone()], Some(&[0.7, 0.7])).is_err());
        let b = wasserstein_barycenter(&[ep(&[0.0]), ep(&[1.0])], Some(&[0.25, 0.75])).unwrap();
        assert_eq!(b.mean(), 0.75);
    }

    #[test]
    fn block_seeds_are_distinct() {
        let s: Vec<u64> = (0..4).map(|k| block_seed(7, k)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
