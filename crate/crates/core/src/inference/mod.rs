//! Bayesian estimation of the game-level and minute-level models.
//!
//! Priors are Normal(0, 1000) on intercepts and fixed effects and
//! Uniform(0, 1) on the carryover parameters. Sampling is done by
//! [`sampler::sample`]; the fit functions here wire the two model levels into
//! it and attach per-observation log-likelihoods for WAIC.

mod diagnostics;
pub mod sampler;

use thiserror::Error;

pub use diagnostics::{diagnostics, ess, split_rhat, Diagnostic};
pub use sampler::{sample, sample_prior, LogLikelihood, ParamKind};

use crate::compare::{CompareError, LogLikMatrix, Waic, WaicAccumulator};
use crate::data::{GameSeries, MinuteSeries, MINUTES_PER_GAME, QH_CELLS};
use crate::model::{self, GameParams, MinuteParams};

pub const ALPHA_S: &str = "alpha_S";
pub const ALPHA_HOME: &str = "alpha_Home";
pub const KAPPA_S: &str = "kappa_S";
pub const ETA_S: &str = "eta_S";
pub const ALPHA_G: &str = "alpha_G";
pub const KAPPA_G: &str = "kappa_G";
pub const ETA_G: &str = "eta_G";

/// Name of the effect of quarter-half cell `cell` (0-based, 1..=7), e.g.
/// `alpha_QH21` for the first half of the second quarter.
pub fn qh_param_name(cell: usize) -> String {
    format!("alpha_QH{}{}", cell / 2 + 1, cell % 2 + 1)
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("invalid MCMC configuration: {0}")]
    Config(String),
    #[error("invalid prior: {0}")]
    Prior(String),
    #[error("chain {chain}: log-likelihood non-finite at all {attempts} initial points")]
    Initialization { chain: usize, attempts: usize },
    #[error("empty count series")]
    EmptySeries,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("no draws")]
    NoDraws,
    #[error(transparent)]
    Waic(#[from] CompareError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub alpha_mean: f64,
    pub alpha_variance: f64,
    pub excitation_low: f64,
    pub excitation_high: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            alpha_mean: 0.0,
            alpha_variance: 1000.0,
            excitation_low: 0.0,
            excitation_high: 1.0,
        }
    }
}

impl PriorSpec {
    fn validate(&self) -> Result<(), InferenceError> {
        if !(self.alpha_variance > 0.0 && self.alpha_variance.is_finite() && self.alpha_mean.is_finite()) {
            return Err(InferenceError::Prior(
                "normal prior needs finite mean and positive variance".into(),
            ));
        }
        if !(self.excitation_low < self.excitation_high
            && self.excitation_low.is_finite()
            && self.excitation_high.is_finite())
        {
            return Err(InferenceError::Prior("uniform prior needs finite low < high".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Iterations (from the start, capped at `burn_in`) during which proposal
    /// scales adapt.
    pub adaptation_window: usize,
    pub target_accept: f64,
    /// Keep per-observation log-likelihoods for every retained draw.
    pub store_pointwise: bool,
}

/// Smallest number of retained draws per chain a configuration may produce.
pub const MIN_RETAINED_PER_CHAIN: usize = 100;

impl McmcConfig {
    /// Defaults: 4 chains, 20000 iterations, 10000 burn-in, thin 2.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            n_chains: 4,
            n_iterations: 20_000,
            burn_in: 10_000,
            thin: 2,
            seed,
            adaptation_window: 10_000,
            target_accept: 0.44,
            store_pointwise: true,
        }
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_iterations.saturating_sub(self.burn_in) + self.thin - 1) / self.thin.max(1)
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        let bad = |m: &str| Err(InferenceError::Config(m.to_string()));
        if self.n_chains == 0 {
            return bad("n_chains must be >= 1");
        }
        if self.thin == 0 {
            return bad("thin must be >= 1");
        }
        if self.burn_in >= self.n_iterations {
            return bad("burn_in must be < n_iterations");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target_accept must lie in (0, 1)");
        }
        if (self.n_iterations - self.burn_in) / self.thin < MIN_RETAINED_PER_CHAIN {
            return Err(InferenceError::Config(format!(
                "(n_iterations - burn_in) / thin must be >= {MIN_RETAINED_PER_CHAIN}"
            )));
        }
        Ok(())
    }
}

/// Retained MCMC draws, one row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub param_names: Vec<String>,
    /// Row-major, `n_draws() x param_names.len()`.
    pub values: Vec<f64>,
    pub chain: Vec<String>,
    pub iteration: Vec<usize>,
}

impl PosteriorDraws {
    pub fn new(param_names: Vec<String>) -> Self {
        Self {
            param_names,
            values: Vec::new(),
            chain: Vec::new(),
            iteration: Vec::new(),
        }
    }

    pub fn push(&mut self, chain: &str, iteration: usize, row: &[f64]) {
        assert_eq!(row.len(), self.param_names.len(), "row width");
        self.values.extend_from_slice(row);
        self.chain.push(chain.to_string());
        self.iteration.push(iteration);
    }

    pub fn n_draws(&self) -> usize {
        self.chain.len()
    }

    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_params();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn index_of(&self, name: &str) -> Result<usize, InferenceError> {
        self.param_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| InferenceError::UnknownParameter(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, InferenceError> {
        let j = self.index_of(name)?;
        Ok((0..self.n_draws()).map(|i| self.row(i)[j]).collect())
    }

    /// Columns split by chain label, chains in first-appearance order.
    pub fn column_by_chain(&self, name: &str) -> Result<Vec<Vec<f64>>, InferenceError> {
        let j = self.index_of(name)?;
        let mut labels: Vec<&str> = Vec::new();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for i in 0..self.n_draws() {
            let k = match labels.iter().position(|l| *l == self.chain[i]) {
                Some(k) => k,
                None => {
                    labels.push(&self.chain[i]);
                    out.push(Vec::new());
                    labels.len() - 1
                }
            };
            out[k].push(self.row(i)[j]);
        }
        Ok(out)
    }
}

/// Output of a sampler run.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub draws: PosteriorDraws,
    /// Per-observation log-likelihoods, rows aligned with `draws`.
    pub pointwise: Option<LogLikMatrix>,
    /// Post-burn-in acceptance rate per chain and parameter.
    pub acceptance: Vec<Vec<f64>>,
}

/// Game-level likelihood. Baseline drops the carryover parameters.
pub struct GameModel<'a> {
    series: &'a GameSeries,
    baseline: bool,
    ln_fact: Vec<f64>,
    ln_fact_sum: f64,
}

impl<'a> GameModel<'a> {
    pub fn new(series: &'a GameSeries, baseline: bool) -> Self {
        let ln_fact: Vec<f64> = series.counts.iter().map(|&y| model::ln_factorial(y)).collect();
        let ln_fact_sum = ln_fact.iter().sum();
        Self {
            series,
            baseline,
            ln_fact,
            ln_fact_sum,
        }
    }

    pub fn params(&self, theta: &[f64]) -> GameParams {
        GameParams {
            alpha_season: theta[0],
            alpha_home: theta[1],
            kappa: if self.baseline { 0.0 } else { theta[2] },
            eta: if self.baseline { 0.0 } else { theta[3] },
        }
    }

    fn for_each_rate(&self, theta: &[f64], mut f: impl FnMut(usize, f64)) {
        let p = self.params(theta);
        let base = [p.alpha_season.exp(), (p.alpha_season + p.alpha_home).exp()];
        let y = &self.series.counts;
        let mut prev = 0.0;
        for g in 0..y.len() {
            let b = base[self.series.home[g] as usize];
            let lam = if g == 0 {
                b
            } else {
                b + p.kappa * prev + p.eta * y[g - 1] as f64
            };
            f(g, lam);
            prev = lam;
        }
    }
}

impl LogLikelihood for GameModel<'_> {
    fn param_names(&self) -> Vec<String> {
        let names: &[&str] = if self.baseline {
            &[ALPHA_S, ALPHA_HOME]
        } else {
            &[ALPHA_S, ALPHA_HOME, KAPPA_S, ETA_S]
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    fn kinds(&self) -> Vec<ParamKind> {
        let mut k = vec![ParamKind::Real; 2];
        if !self.baseline {
            k.extend([ParamKind::Bounded; 2]);
        }
        k
    }

    fn n_obs(&self) -> usize {
        self.series.len()
    }

    fn log_lik(&self, theta: &[f64]) -> f64 {
        let y = &self.series.counts;
        let mut acc = 0.0;
        self.for_each_rate(theta, |g, lam| acc += y[g] as f64 * lam.ln() - lam);
        acc - self.ln_fact_sum
    }

    fn pointwise(&self, theta: &[f64], out: &mut [f64]) {
        let y = &self.series.counts;
        self.for_each_rate(theta, |g, lam| {
            out[g] = model::poisson_ln_pmf(y[g], lam, self.ln_fact[g])
        });
    }
}

/// Minute-level likelihood over a block of games with fixed per-game offsets.
pub struct MinuteModel<'a> {
    series: &'a MinuteSeries,
    scales: Vec<f64>,
    baseline: bool,
    ln_fact: Vec<f64>,
    ln_fact_sum: f64,
}

impl<'a> MinuteModel<'a> {
    pub fn new(series: &'a MinuteSeries, offsets: &[f64], baseline: bool) -> Result<Self, InferenceError> {
        if offsets.len() != series.n_games() {
            return Err(InferenceError::Dimension(format!(
                "{} offsets for {} games",
                offsets.len(),
                series.n_games()
            )));
        }
        if let Some(o) = offsets.iter().find(|o| !(o.is_finite() && **o >= 0.0)) {
            return Err(InferenceError::Dimension(format!(
                "offset {o} is not a finite nonnegative rate"
            )));
        }
        let ln_fact: Vec<f64> = series
            .counts
            .iter()
            .flatten()
            .map(|&y| model::ln_factorial(y))
            .collect();
        let ln_fact_sum = ln_fact.iter().sum();
        Ok(Self {
            series,
            scales: offsets.iter().map(|&o| model::offset_scale(o)).collect(),
            baseline,
            ln_fact,
            ln_fact_sum,
        })
    }

    pub fn params(&self, theta: &[f64]) -> MinuteParams {
        let mut alpha_qh = [0.0; QH_CELLS - 1];
        alpha_qh.copy_from_slice(&theta[1..QH_CELLS]);
        MinuteParams {
            alpha_game: theta[0],
            alpha_qh,
            kappa: if self.baseline { 0.0 } else { theta[QH_CELLS] },
            eta: if self.baseline { 0.0 } else { theta[QH_CELLS + 1] },
        }
    }

    fn for_each_rate(&self, theta: &[f64], mut f: impl FnMut(usize, usize, f64)) {
        let p = self.params(theta);
        let base = p.cell_base();
        let mut lam = [0.0; MINUTES_PER_GAME];
        for (g, (row, &scale)) in self.series.counts.iter().zip(&self.scales).enumerate() {
            model::minute_rates_into(&base, scale, p.kappa, p.eta, row, &mut lam);
            for (m, &l) in lam.iter().enumerate() {
                f(g, m, l);
            }
        }
    }
}

impl LogLikelihood for MinuteModel<'_> {
    fn param_names(&self) -> Vec<String> {
        let mut names = vec![ALPHA_G.to_string()];
        names.extend((1..QH_CELLS).map(qh_param_name));
        if !self.baseline {
            names.push(KAPPA_G.into());
            names.push(ETA_G.into());
        }
        names
    }

    fn kinds(&self) -> Vec<ParamKind> {
        let mut k = vec![ParamKind::Real; QH_CELLS];
        if !self.baseline {
            k.extend([ParamKind::Bounded; 2]);
        }
        k
    }

    fn n_obs(&self) -> usize {
        self.series.n_games() * MINUTES_PER_GAME
    }

    fn log_lik(&self, theta: &[f64]) -> f64 {
        let y = &self.series.counts;
        let mut acc = 0.0;
        self.for_each_rate(theta, |g, m, lam| acc += y[g][m] as f64 * lam.ln() - lam);
        acc - self.ln_fact_sum
    }

    fn pointwise(&self, theta: &[f64], out: &mut [f64]) {
        let y = &self.series.counts;
        self.for_each_rate(theta, |g, m, lam| {
            let i = g * MINUTES_PER_GAME + m;
            out[i] = model::poisson_ln_pmf(y[g][m], lam, self.ln_fact[i]);
        });
    }
}

/// Sample the game-level posterior; `baseline` drops κ_S and η_S.
pub fn fit_game_model(
    y: &GameSeries,
    priors: &PriorSpec,
    cfg: &McmcConfig,
    baseline: bool,
) -> Result<Fit, InferenceError> {
    if y.is_empty() {
        return Err(InferenceError::EmptySeries);
    }
    sample(&GameModel::new(y, baseline), priors, cfg)
}

/// Sample the minute-level posterior for the games in `y`, with `offsets[g]`
/// the posterior mean game rate of game `g`.
pub fn fit_minute_model(
    y: &MinuteSeries,
    offsets: &[f64],
    priors: &PriorSpec,
    cfg: &McmcConfig,
    baseline: bool,
) -> Result<Fit, InferenceError> {
    if y.n_games() == 0 {
        return Err(InferenceError::EmptySeries);
    }
    sample(&MinuteModel::new(y, offsets, baseline)?, priors, cfg)
}

/// Posterior mean of λ_g for every game, from game-level draws (full or
/// baseline). These are the offsets of the minute-level model.
pub fn posterior_mean_game_rates(draws: &PosteriorDraws, y: &GameSeries) -> Result<Vec<f64>, InferenceError> {
    if draws.n_draws() == 0 {
        return Err(InferenceError::NoDraws);
    }
    let a = draws.index_of(ALPHA_S)?;
    let h = draws.index_of(ALPHA_HOME)?;
    let k = draws.index_of(KAPPA_S).ok();
    let e = draws.index_of(ETA_S).ok();
    let mut acc = vec![0.0; y.len()];
    for i in 0..draws.n_draws() {
        let row = draws.row(i);
        let p = GameParams {
            alpha_season: row[a],
            alpha_home: row[h],
            kappa: k.map_or(0.0, |j| row[j]),
            eta: e.map_or(0.0, |j| row[j]),
        };
        for (s, l) in acc.iter_mut().zip(model::game_rate_path(&p, y).0) {
            *s += l;
        }
    }
    let n = draws.n_draws() as f64;
    Ok(acc.into_iter().map(|s| s / n).collect())
}

/// WAIC of `model` over stored draws, evaluated one draw at a time. Draw
/// columns must follow the model's parameter order.
pub fn waic_from_draws<M: LogLikelihood>(model: &M, draws: &PosteriorDraws) -> Result<Waic, InferenceError> {
    if draws.param_names != model.param_names() {
        return Err(InferenceError::Dimension(format!(
            "draws carry {:?}, model expects {:?}",
            draws.param_names,
            model.param_names()
        )));
    }
    let mut acc = WaicAccumulator::new(model.n_obs());
    let mut row = vec![0.0; model.n_obs()];
    for s in 0..draws.n_draws() {
        model.pointwise(draws.row(s), &mut row);
        acc.push(&row);
    }
    Ok(acc.finish()?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (h = (n - 1)p, the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and equal-tailed 95% interval of a sample.
pub fn summarize(values: &[f64]) -> Result<Summary, InferenceError> {
    if values.is_empty() {
        return Err(InferenceError::NoDraws);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        ci_low: quantile_sorted(&sorted, 0.025),
        ci_high: quantile_sorted(&sorted, 0.975),
    })
}

pub fn posterior_summary(draws: &PosteriorDraws, param: &str) -> Result<Summary, InferenceError> {
    summarize(&draws.column(param)?)
}

/// Fraction of draws with κ + η < 1.
pub fn stationarity_probability(
    draws: &PosteriorDraws,
    kappa_name: &str,
    eta_name: &str,
) -> Result<f64, InferenceError> {
    let k = draws.column(kappa_name)?;
    let e = draws.column(eta_name)?;
    if k.is_empty() {
        return Err(InferenceError::NoDraws);
    }
    let n = k.iter().zip(&e).filter(|(k, e)| model::is_stationary(**k, **e)).count();
    Ok(n as f64 / k.len() as f64)
}
