//! Doubly self-exciting Poisson models for scoring counts.
//!
//! Two nested INGARCH(1,1) count models are estimated by Markov chain Monte
//! Carlo: a game-level model over a season and a minute-level model within
//! games that takes the posterior mean game rate as an offset. Minute-level
//! fits run on contiguous blocks of games and are merged per parameter with
//! one-dimensional Wasserstein barycenters. WAIC compares self-exciting fits
//! against baselines without carryover, and entities can be clustered by the
//! Wasserstein distance between their posteriors (UPGMA).
//!
//! Module map:
//! - [`data`]: shot-event parsing and count-series construction
//! - [`model`]: rate recursions, likelihood, closed-form moments, simulation
//! - [`inference`]: adaptive random-walk Metropolis, summaries, diagnostics
//! - [`merge`]: game partitions, 1-D Wasserstein distance and barycenters
//! - [`compare`]: WAIC and model-comparison tables
//! - [`cluster`]: posterior distance matrices, UPGMA, Newick output
//! - [`io`]: delimited-text formats for draws and log-likelihood matrices

pub mod cluster;
pub mod compare;
pub mod data;
pub mod inference;
pub mod io;
pub mod merge;
pub mod model;

pub use cluster::{Dendrogram, DistanceMatrix};
pub use compare::{LogLikMatrix, Waic, WaicAccumulator};
pub use data::{EntitySelector, GameSeries, MinuteSeries, ShotEvent};
pub use inference::{Fit, McmcConfig, PosteriorDraws, PriorSpec};
pub use merge::{EmpiricalPosterior, GamePartition, WassersteinOrder};
pub use model::{GameParams, IngarchParams, MinuteParams, RatePath};
