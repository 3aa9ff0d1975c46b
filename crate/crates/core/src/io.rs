//! Delimited-text formats for draws, pointwise log-likelihoods and game-rate
//! tables. Lines starting with `#` are comments (provenance headers) and are
//! skipped on read. Floats are written in shortest round-trip form.

use std::io::{Read, Write};

use thiserror::Error;

use crate::compare::LogLikMatrix;
use crate::inference::PosteriorDraws;
use crate::merge::EmpiricalPosterior;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Format(String),
}

/// Chain label used for barycentric posteriors.
pub const BARYCENTER_CHAIN: &str = "barycenter";

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r)
}

fn write_comment<W: Write>(w: &mut W, comment: Option<&str>) -> std::io::Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

fn row_line(chain: &str, iteration: usize, values: &[f64]) -> String {
    let mut s = format!("{chain},{iteration}");
    for v in values {
        s.push(',');
        s.push_str(&v.to_string());
    }
    s
}

/// `chain,iteration,<params...>`, one retained draw per row.
pub fn write_draws<W: Write>(mut w: W, draws: &PosteriorDraws, comment: Option<&str>) -> Result<(), IoError> {
    write_comment(&mut w, comment)?;
    writeln!(w, "chain,iteration,{}", draws.param_names.join(","))?;
    for i in 0..draws.n_draws() {
        writeln!(w, "{}", row_line(&draws.chain[i], draws.iteration[i], draws.row(i)))?;
    }
    Ok(())
}

fn parse_f64(s: &str, line: u64) -> Result<f64, IoError> {
    s.trim()
        .parse()
        .map_err(|_| IoError::Format(format!("line {line}: cannot parse {s:?} as a number")))
}

pub fn read_draws<R: Read>(r: R) -> Result<PosteriorDraws, IoError> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "chain" || &headers[1] != "iteration" {
        return Err(IoError::Format("draws header must start with `chain,iteration`".into()));
    }
    let mut draws = PosteriorDraws::new(headers.iter().skip(2).map(str::to_string).collect());
    let mut row = Vec::with_capacity(draws.n_params());
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let it: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| IoError::Format(format!("line {line}: bad iteration {:?}", &rec[1])))?;
        row.clear();
        for f in rec.iter().skip(2) {
            row.push(parse_f64(f, line)?);
        }
        draws.push(&rec[0], it, &row);
    }
    Ok(draws)
}

/// Pointwise log-likelihoods in the draws layout: `chain,iteration,obs_1..obs_n`.
pub fn write_loglik<W: Write>(
    mut w: W,
    draws: &PosteriorDraws,
    ll: &LogLikMatrix,
    comment: Option<&str>,
) -> Result<(), IoError> {
    if ll.n_draws() != draws.n_draws() {
        return Err(IoError::Format("log-likelihood rows do not match draws".into()));
    }
    write_comment(&mut w, comment)?;
    let cols: Vec<String> = (1..=ll.n_obs()).map(|i| format!("obs_{i}")).collect();
    writeln!(w, "chain,iteration,{}", cols.join(","))?;
    for s in 0..ll.n_draws() {
        writeln!(w, "{}", row_line(&draws.chain[s], draws.iteration[s], ll.row(s)))?;
    }
    Ok(())
}

pub fn read_loglik<R: Read>(r: R) -> Result<LogLikMatrix, IoError> {
    let d = read_draws(r)?;
    Ok(LogLikMatrix::new(d.n_draws(), d.n_params(), d.values))
}

/// Barycentric posteriors as draws with chain label `barycenter`. All
/// posteriors must have the same number of samples.
pub fn barycenter_draws(posteriors: &[(String, EmpiricalPosterior)]) -> Result<PosteriorDraws, IoError> {
    let n = posteriors.first().map_or(0, |(_, p)| p.len());
    if posteriors.iter().any(|(_, p)| p.len() != n) {
        return Err(IoError::Format("barycenters differ in sample count".into()));
    }
    let mut draws = PosteriorDraws::new(posteriors.iter().map(|(name, _)| name.clone()).collect());
    for i in 0..n {
        let row: Vec<f64> = posteriors.iter().map(|(_, p)| p.samples()[i]).collect();
        draws.push(BARYCENTER_CHAIN, i + 1, &row);
    }
    Ok(draws)
}

/// `game,game_id,lambda_hat` table of posterior mean game rates.
pub fn write_game_rates<W: Write>(
    mut w: W,
    game_ids: &[String],
    rates: &[f64],
    comment: Option<&str>,
) -> Result<(), IoError> {
    write_comment(&mut w, comment)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["game", "game_id", "lambda_hat"])?;
    for (g, (id, r)) in game_ids.iter().zip(rates).enumerate() {
        wtr.write_record([(g + 1).to_string(), id.clone(), r.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_game_rates<R: Read>(r: R) -> Result<(Vec<String>, Vec<f64>), IoError> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IoError::Format(format!("rate table lacks column `{name}`")))
    };
    let (id_col, rate_col) = (col("game_id")?, col("lambda_hat")?);
    let mut ids = Vec::new();
    let mut rates = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        ids.push(rec[id_col].to_string());
        rates.push(parse_f64(&rec[rate_col], line)?);
    }
    Ok((ids, rates))
}
