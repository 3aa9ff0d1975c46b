//! WAIC and model comparison.
//!
//! ```text
//! lppd   = Σ_i ln( mean_s exp(ll[s, i]) )
//! p_waic = Σ_i var_s ll[s, i]        (unbiased variance over draws)
//! waic   = -2 (lppd - p_waic)
//! ```
//! Lower is better.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("log-likelihood matrix has no draws or no observations")]
    Empty,
    #[error("non-finite log-likelihood at draw {draw}, observation {obs}")]
    NonFinite { draw: usize, obs: usize },
    #[error("model `{model}` covers {found} observations, expected {expected}")]
    Incomparable {
        model: String,
        expected: usize,
        found: usize,
    },
    #[error("no models to compare")]
    NoModels,
}

/// Per-observation log-likelihoods, one row per retained draw.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikMatrix {
    n_draws: usize,
    n_obs: usize,
    values: Vec<f64>,
}

impl LogLikMatrix {
    /// `values` is row-major, `n_draws x n_obs`.
    pub fn new(n_draws: usize, n_obs: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_draws * n_obs, "matrix size");
        Self { n_draws, n_obs, values }
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_obs..(s + 1) * self.n_obs]
    }

    pub fn get(&self, s: usize, i: usize) -> f64 {
        self.values[s * self.n_obs + i]
    }

    /// Columns `obs` (half-open) as a new matrix.
    pub fn columns(&self, obs: std::ops::Range<usize>) -> LogLikMatrix {
        let width = obs.len();
        let mut values = Vec::with_capacity(self.n_draws * width);
        for s in 0..self.n_draws {
            values.extend_from_slice(&self.row(s)[obs.clone()]);
        }
        LogLikMatrix::new(self.n_draws, width, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// Contribution of one observation column: (ln mean exp, unbiased variance).
fn column_terms(ll: &LogLikMatrix, i: usize) -> (f64, f64) {
    let s = ll.n_draws();
    let col = (0..s).map(|k| ll.get(k, i));
    let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + col.clone().map(|v| (v - max).exp()).sum::<f64>().ln();
    let lpd = lse - (s as f64).ln();
    if s < 2 {
        return (lpd, 0.0);
    }
    let mean = col.clone().sum::<f64>() / s as f64;
    let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s as f64 - 1.0);
    (lpd, var)
}

pub fn waic(ll: &LogLikMatrix) -> Result<Waic, CompareError> {
    if ll.n_draws() == 0 || ll.n_obs() == 0 {
        return Err(CompareError::Empty);
    }
    if let Some(pos) = ll.values.iter().position(|v| !v.is_finite()) {
        return Err(CompareError::NonFinite {
            draw: pos / ll.n_obs,
            obs: pos % ll.n_obs,
        });
    }
    if ll.n_draws() == 1 {
        log::warn!("WAIC from a single draw: p_waic set to 0");
    }
    let (lppd, p_waic) = (0..ll.n_obs())
        .map(|i| column_terms(ll, i))
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    Ok(Waic {
        waic: -2.0 * (lppd - p_waic),
        lppd,
        p_waic,
    })
}

/// Single-pass WAIC over draws fed one row at a time, for fits whose
/// pointwise matrix is too large to hold.
#[derive(Debug, Clone)]
pub struct WaicAccumulator {
    n: usize,
    max: Vec<f64>,
    /// Σ exp(ll - max) per observation.
    scaled_sum: Vec<f64>,
    mean: Vec<f64>,
    m2: Vec<f64>,
    non_finite: Option<(usize, usize)>,
}

impl WaicAccumulator {
    pub fn new(n_obs: usize) -> Self {
        Self {
            n: 0,
            max: vec![f64::NEG_INFINITY; n_obs],
            scaled_sum: vec![0.0; n_obs],
            mean: vec![0.0; n_obs],
            m2: vec![0.0; n_obs],
            non_finite: None,
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.max.len(), "row width");
        self.n += 1;
        let k = self.n as f64;
        for (i, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                self.non_finite.get_or_insert((self.n - 1, i));
                continue;
            }
            if v > self.max[i] {
                self.scaled_sum[i] = self.scaled_sum[i] * (self.max[i] - v).exp() + 1.0;
                self.max[i] = v;
            } else {
                self.scaled_sum[i] += (v - self.max[i]).exp();
            }
            let delta = v - self.mean[i];
            self.mean[i] += delta / k;
            self.m2[i] += delta * (v - self.mean[i]);
        }
    }

    pub fn finish(&self) -> Result<Waic, CompareError> {
        if self.n == 0 || self.max.is_empty() {
            return Err(CompareError::Empty);
        }
        if let Some((draw, obs)) = self.non_finite {
            return Err(CompareError::NonFinite { draw, obs });
        }
        if self.n == 1 {
            log::warn!("WAIC from a single draw: p_waic set to 0");
        }
        let ln_n = (self.n as f64).ln();
        let mut lppd = 0.0;
        let mut p_waic = 0.0;
        for i in 0..self.max.len() {
            lppd += self.max[i] + self.scaled_sum[i].ln() - ln_n;
            if self.n > 1 {
                p_waic += self.m2[i] / (self.n as f64 - 1.0);
            }
        }
        Ok(Waic {
            waic: -2.0 * (lppd - p_waic),
            lppd,
            p_waic,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub waic: Waic,
    pub best: bool,
}

/// WAIC for each named model; the smallest WAIC is flagged best, ties going
/// to the lexicographically smallest name. Rows keep input order.
pub fn compare_models(fits: &[(&str, &LogLikMatrix)]) -> Result<Vec<ComparisonRow>, CompareError> {
    let entries = fits
        .iter()
        .map(|(name, ll)| Ok((name.to_string(), ll.n_obs(), waic(ll)?)))
        .collect::<Result<Vec<_>, CompareError>>()?;
    rank_waic(entries)
}

/// Ranking step of [`compare_models`] for WAIC values computed elsewhere,
/// given as `(model, observation count, waic)`.
pub fn rank_waic(entries: Vec<(String, usize, Waic)>) -> Result<Vec<ComparisonRow>, CompareError> {
    let expected = entries.first().ok_or(CompareError::NoModels)?.1;
    if let Some((name, found, _)) = entries.iter().find(|(_, n, _)| *n != expected) {
        return Err(CompareError::Incomparable {
            model: name.clone(),
            expected,
            found: *found,
        });
    }
    let mut rows: Vec<ComparisonRow> = entries
        .into_iter()
        .map(|(model, _, waic)| ComparisonRow {
            model,
            waic,
            best: false,
        })
        .collect();
    let best = (0..rows.len())
        .min_by(|&a, &b| {
            rows[a]
                .waic
                .waic
                .total_cmp(&rows[b].waic.waic)
                .then_with(|| rows[a].model.cmp(&rows[b].model))
        })
        .expect("at least one row");
    rows[best].best = true;
    Ok(rows)
}

/// Comparison table as `model,waic,lppd,p_waic,best` text.
pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("model,waic,lppd,p_waic,best\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.model, r.waic.waic, r.waic.lppd, r.waic.p_waic, r.best
        ));
    }
    out
}
