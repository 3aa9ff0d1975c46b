//! Split-R̂ and effective sample size.

use super::{InferenceError, PosteriorDraws};

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub param: String,
    /// `None` when fewer than two chains are available.
    pub rhat: Option<f64>,
    pub ess: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Potential scale reduction over chains split in half. Returns `None` for a
/// single chain; infinity when within-chain variance is zero but chains disagree.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    if chains.len() < 2 {
        return None;
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if n < 2 {
        return None;
    }
    let halves: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..n], &c[n..2 * n]]).collect();
    let w = halves.iter().map(|h| var(h)).sum::<f64>() / halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let b_over_n = var(&means);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if w == 0.0 {
        return Some(if b_over_n == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Some((var_plus / w).sqrt())
}

fn autocov(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let n = x.len();
    x[..n - lag]
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum::<f64>()
        / n as f64
}

/// Multi-chain effective sample size. Autocorrelations are combined across
/// chains and summed in adjacent pairs until a pair sum turns negative
/// (Geyer's initial positive sequence). NaN when every draw is identical.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let m = chains.len();
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let w = chains.iter().map(|c| var(c)).sum::<f64>() / m as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let b_over_n = if m > 1 { var(&means) } else { 0.0 };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if var_plus == 0.0 {
        return f64::NAN;
    }
    let rho = |t: usize| {
        let acov = chains.iter().map(|c| autocov(c, t)).sum::<f64>() / m as f64;
        1.0 - (w - acov) / var_plus
    };
    let mut tau = -1.0;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        tau += 2.0 * pair;
        t += 2;
    }
    (m * n) as f64 / tau.max(1.0 / (m * n) as f64)
}

/// R̂ and ESS for every parameter of `draws`.
pub fn diagnostics(draws: &PosteriorDraws) -> Result<Vec<Diagnostic>, InferenceError> {
    draws
        .param_names
        .iter()
        .map(|name| {
            let chains = draws.column_by_chain(name)?;
            Ok(Diagnostic {
                param: name.clone(),
                rhat: split_rhat(&chains),
                ess: ess(&chains),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iid(seed: u64, m: usize, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()
    }

    #[test]
    fn iid_chains_have_rhat_near_one() {
        for seed in 0..20 {
            let r = split_rhat(&iid(seed, 4, 1000)).unwrap();
            // Split-R̂ of i.i.d. chains sits at 1 up to sampling noise on either side.
            assert!((0.99..=1.05).contains(&r), "seed {seed}: {r}");
        }
    }

    #[test]
    fn disagreeing_constant_chains_diverge() {
        let r = split_rhat(&[vec![0.0; 100], vec![1.0; 100]]).unwrap();
        assert!(r > 1.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..500).map(|_| 5.0 + rng.random::<f64>()).collect();
        assert!(split_rhat(&[a, b]).unwrap() > 1.1);
    }

    #[test]
    fn single_chain_has_no_rhat() {
        assert_eq!(split_rhat(&iid(1, 1, 100)), None);
    }

    #[test]
    fn iid_ess_close_to_draw_count() {
        for seed in 0..10 {
            let e = ess(&iid(seed, 4, 1000));
            assert!((e - 4000.0).abs() <= 800.0, "seed {seed}: {e}");
        }
    }

    #[test]
    fn autocorrelated_chain_has_small_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut x = 0.0;
        let chain: Vec<f64> = (0..5000)
            .map(|_| {
                x = 0.9 * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        // AR(1) with phi = 0.9: ESS ~ n (1 - phi) / (1 + phi) ~ 263.
        let e = ess(&[chain]);
        assert!(e > 150.0 && e < 400.0, "{e}");
    }
}
