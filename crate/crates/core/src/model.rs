//! INGARCH(1,1) rate recursions, Poisson likelihood, closed-form moments and
//! forward simulation.
//!
//! Game level:
//! ```text
//! λ_g = exp(α_S + α_Home·home_g) + κ_S·λ_{g-1} + η_S·Y_{g-1}      (g > 1)
//! ```
//! Minute level, reset at every game boundary:
//! ```text
//! λ_gm = exp(α_G + α_QH(m) + offset_g/48) + κ_G·λ_{g,m-1} + η_G·Y_{g,m-1}   (m > 1)
//! ```
//! The first rate of each recursion has no history and uses only the
//! exponential term.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::data::{GameSeries, MinuteSeries, MINUTES_PER_GAME, QH_CELLS, QH_INDEX};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("non-stationary parameters: kappa + eta = {0} >= 1")]
    NonStationary(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("autocorrelation lag must be >= 1")]
    ZeroLag,
}

/// Game-level parameters (log-rate intercept and home effect, carryovers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    pub alpha_season: f64,
    pub alpha_home: f64,
    pub kappa: f64,
    pub eta: f64,
}

/// Minute-level parameters. `alpha_qh[c - 1]` is the effect of quarter-half
/// cell `c` (1..=7) relative to the first half of the first quarter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinuteParams {
    pub alpha_game: f64,
    pub alpha_qh: [f64; QH_CELLS - 1],
    pub kappa: f64,
    pub eta: f64,
}

impl MinuteParams {
    /// exp(α_G + α_QH) for each of the 8 cells, reference cell first.
    pub fn cell_base(&self) -> [f64; QH_CELLS] {
        let mut out = [self.alpha_game.exp(); QH_CELLS];
        for (c, a) in self.alpha_qh.iter().enumerate() {
            out[c + 1] = (self.alpha_game + a).exp();
        }
        out
    }
}

/// Constant-baseline INGARCH(1,1): λ_t = d + κ·λ_{t-1} + η·Y_{t-1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngarchParams {
    pub d: f64,
    pub kappa: f64,
    pub eta: f64,
}

/// Conditional Poisson rates aligned with a count series.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePath(pub Vec<f64>);

impl RatePath {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn is_stationary(kappa: f64, eta: f64) -> bool {
    kappa + eta < 1.0
}

/// Game-level recursion with precomputed away/home exponential terms.
pub(crate) fn game_rates_into(base: [f64; 2], kappa: f64, eta: f64, counts: &[u32], home: &[bool], out: &mut [f64]) {
    let mut prev = 0.0;
    for g in 0..counts.len() {
        let b = base[home[g] as usize];
        let lam = if g == 0 {
            b
        } else {
            b + kappa * prev + eta * counts[g - 1] as f64
        };
        out[g] = lam;
        prev = lam;
    }
}

/// One game of the minute-level recursion. `scale` is exp(offset/48).
pub(crate) fn minute_rates_into(
    cell_base: &[f64; QH_CELLS],
    scale: f64,
    kappa: f64,
    eta: f64,
    counts: &[u32; MINUTES_PER_GAME],
    out: &mut [f64],
) {
    let mut prev = 0.0;
    for m in 0..MINUTES_PER_GAME {
        let b = cell_base[QH_INDEX[m]] * scale;
        let lam = if m == 0 {
            b
        } else {
            b + kappa * prev + eta * counts[m - 1] as f64
        };
        out[m] = lam;
        prev = lam;
    }
}

pub(crate) fn offset_scale(offset: f64) -> f64 {
    (offset / MINUTES_PER_GAME as f64).exp()
}

pub fn game_rate_path(p: &GameParams, y: &GameSeries) -> RatePath {
    let base = [p.alpha_season.exp(), (p.alpha_season + p.alpha_home).exp()];
    let mut out = vec![0.0; y.len()];
    game_rates_into(base, p.kappa, p.eta, &y.counts, &y.home, &mut out);
    RatePath(out)
}

/// Rates for one game of minute counts given the game-rate offset.
pub fn minute_rate_path(p: &MinuteParams, y_game: &[u32; MINUTES_PER_GAME], offset: f64) -> RatePath {
    let mut out = vec![0.0; MINUTES_PER_GAME];
    minute_rates_into(&p.cell_base(), offset_scale(offset), p.kappa, p.eta, y_game, &mut out);
    RatePath(out)
}

/// ln(y!) via log-gamma.
pub fn ln_factorial(y: u32) -> f64 {
    statrs::function::gamma::ln_gamma(y as f64 + 1.0)
}

#[inline]
pub(crate) fn poisson_ln_pmf(y: u32, lambda: f64, ln_fact: f64) -> f64 {
    y as f64 * lambda.ln() - lambda - ln_fact
}

pub fn poisson_log_likelihood(lambda: &RatePath, y: &[u32]) -> Result<f64, ModelError> {
    if lambda.0.len() != y.len() {
        return Err(ModelError::Dimension {
            expected: lambda.0.len(),
            found: y.len(),
        });
    }
    Ok(lambda
        .0
        .iter()
        .zip(y)
        .map(|(&l, &k)| poisson_ln_pmf(k, l, ln_factorial(k)))
        .sum())
}

fn check_stationary(p: &IngarchParams) -> Result<f64, ModelError> {
    let s = p.kappa + p.eta;
    if is_stationary(p.kappa, p.eta) {
        Ok(s)
    } else {
        Err(ModelError::NonStationary(s))
    }
}

pub fn unconditional_mean(p: &IngarchParams) -> Result<f64, ModelError> {
    let s = check_stationary(p)?;
    Ok(p.d / (1.0 - s))
}

pub fn unconditional_variance(p: &IngarchParams) -> Result<f64, ModelError> {
    let s = check_stationary(p)?;
    let mu = p.d / (1.0 - s);
    Ok(mu * (1.0 - s * s + p.eta * p.eta) / (1.0 - s * s))
}

/// Corr(Y_t, Y_{t-r}). Independent of `d`.
pub fn acf(p: &IngarchParams, r: u32) -> Result<f64, ModelError> {
    if r == 0 {
        return Err(ModelError::ZeroLag);
    }
    let s = check_stationary(p)?;
    let k = p.kappa;
    let e = p.eta;
    Ok(e * (1.0 - k * (k + e)) * s.powi(r as i32 - 1) / (1.0 - s * s + e * e))
}

impl GameParams {
    /// Constant-baseline approximation for moment and ACF formulas: `d` is the
    /// mean of the exponential term over the observed home/away design.
    pub fn effective_ingarch(&self, home: &[bool]) -> IngarchParams {
        let n = home.len().max(1) as f64;
        let d = home
            .iter()
            .map(|&h| (self.alpha_season + if h { self.alpha_home } else { 0.0 }).exp())
            .sum::<f64>()
            / n;
        IngarchParams {
            d,
            kappa: self.kappa,
            eta: self.eta,
        }
    }
}

impl MinuteParams {
    /// Constant-baseline approximation: `d` averages the exponential term
    /// over all cells and game offsets.
    pub fn effective_ingarch(&self, offsets: &[f64]) -> IngarchParams {
        let base = self.cell_base();
        let cell_mean = QH_INDEX.iter().map(|&c| base[c]).sum::<f64>() / MINUTES_PER_GAME as f64;
        let scale = if offsets.is_empty() {
            1.0
        } else {
            offsets.iter().map(|&o| offset_scale(o)).sum::<f64>() / offsets.len() as f64
        };
        IngarchParams {
            d: cell_mean * scale,
            kappa: self.kappa,
            eta: self.eta,
        }
    }
}

fn warn_if_nonstationary(kappa: f64, eta: f64) {
    if !is_stationary(kappa, eta) {
        log::warn!(
            "simulating with non-stationary parameters (kappa + eta = {})",
            kappa + eta
        );
    }
}

fn draw_poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u32 {
    // Poisson::new only rejects non-positive or non-finite rates, which the
    // recursions never produce for finite parameters.
    Poisson::new(lambda).expect("positive finite rate").sample(rng) as u32
}

/// Simulate `n` steps of a constant-baseline INGARCH(1,1), starting from λ_1 = d.
pub fn simulate_ingarch(p: &IngarchParams, n: usize, seed: u64) -> Vec<u32> {
    warn_if_nonstationary(p.kappa, p.eta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut lam = p.d;
    for t in 0..n {
        if t > 0 {
            lam = p.d + p.kappa * lam + p.eta * out[t - 1] as f64;
        }
        out.push(draw_poisson(&mut rng, lam));
    }
    out
}

pub fn simulate_game_series(p: &GameParams, home: &[bool], seed: u64) -> GameSeries {
    warn_if_nonstationary(p.kappa, p.eta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [p.alpha_season.exp(), (p.alpha_season + p.alpha_home).exp()];
    let mut counts: Vec<u32> = Vec::with_capacity(home.len());
    let mut lam = 0.0;
    for (g, &h) in home.iter().enumerate() {
        lam = if g == 0 {
            base[h as usize]
        } else {
            base[h as usize] + p.kappa * lam + p.eta * counts[g - 1] as f64
        };
        counts.push(draw_poisson(&mut rng, lam));
    }
    GameSeries {
        counts,
        home: home.to_vec(),
        game_ids: synthetic_ids(home.len()),
    }
}

/// One season of minute counts, one game per entry of `offsets`.
pub fn simulate_minute_series(p: &MinuteParams, offsets: &[f64], seed: u64) -> MinuteSeries {
    warn_if_nonstationary(p.kappa, p.eta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = p.cell_base();
    let counts = offsets
        .iter()
        .map(|&o| simulate_minutes(&base, o, p.kappa, p.eta, &mut rng))
        .collect();
    MinuteSeries {
        counts,
        game_ids: synthetic_ids(offsets.len()),
    }
}

pub(crate) fn simulate_minutes(
    cell_base: &[f64; QH_CELLS],
    offset: f64,
    kappa: f64,
    eta: f64,
    rng: &mut ChaCha8Rng,
) -> [u32; MINUTES_PER_GAME] {
    let scale = offset_scale(offset);
    let mut row = [0u32; MINUTES_PER_GAME];
    let mut lam = 0.0;
    for m in 0..MINUTES_PER_GAME {
        let b = cell_base[QH_INDEX[m]] * scale;
        lam = if m == 0 {
            b
        } else {
            b + kappa * lam + eta * row[m - 1] as f64
        };
        row[m] = draw_poisson(rng, lam);
    }
    row
}

pub(crate) fn synthetic_ids(n: usize) -> Vec<String> {
    (1..=n).map(|g| format!("G{g:04}")).collect()
}
