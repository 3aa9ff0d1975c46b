//! `waic`, `cluster` and `acf`: deterministic post-processing of fit outputs.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use dse_core::cluster::{format_distance_matrix, posterior_distance_matrix, to_newick, upgma};
use dse_core::compare::{format_comparison, rank_waic, waic, Waic};
use dse_core::inference::{summarize, PosteriorDraws, ETA_G, ETA_S, KAPPA_G, KAPPA_S};
use dse_core::io;
use dse_core::merge::{EmpiricalPosterior, WassersteinOrder};
use dse_core::model::{acf as model_acf, is_stationary, IngarchParams};

use crate::error::{CliError, CliResult};
use crate::output::{slug, stem_label, OutputDir, Provenance};
use crate::GlobalArgs;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))
}

fn read_draws(path: &Path) -> CliResult<PosteriorDraws> {
    let file = File::open(path).map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    io::read_draws(BufReader::new(file)).map_err(|e| CliError::from(e).context(path.display().to_string()))
}

/// `[NAME=]PATH`; a bare path is taken whole when it exists.
fn split_named(arg: &str) -> (Option<String>, PathBuf) {
    if !Path::new(arg).exists() {
        if let Some((name, path)) = arg.split_once('=') {
            return (Some(name.to_string()), PathBuf::from(path));
        }
    }
    (None, PathBuf::from(arg))
}

/// WAIC entries of one file: a pointwise log-likelihood matrix or a WAIC
/// table written by a fit command.
fn load_waic(path: &Path, name: Option<String>) -> CliResult<Vec<(String, usize, Waic)>> {
    let text = read_text(path)?;
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap_or_default();
    if header.starts_with("chain,iteration") {
        let ll = io::read_loglik(text.as_bytes()).map_err(|e| CliError::from(e).context(path.display().to_string()))?;
        let label = name.unwrap_or_else(|| stem_label(path, &["_loglik"]));
        return Ok(vec![(label, ll.n_obs(), waic(&ll)?)]);
    }
    if !header.starts_with("model,n_obs,waic,lppd,p_waic") {
        return Err(CliError::data(format!(
            "{}: neither a log-likelihood nor a WAIC table",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || CliError::data(format!("{}: malformed row `{line}`", path.display()));
        if f.len() != 5 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let w = Waic {
            waic: num(f[2])?,
            lppd: num(f[3])?,
            p_waic: num(f[4])?,
        };
        let n_obs = f[1].parse().map_err(|_| bad())?;
        rows.push((name.clone().unwrap_or_else(|| f[0].to_string()), n_obs, w));
    }
    Ok(rows)
}

pub fn compare_fits(g: &GlobalArgs, fits: &[String]) -> CliResult<()> {
    let mut prov = Provenance::new("waic", None);
    let mut entries = Vec::new();
    for arg in fits {
        let (name, path) = split_named(arg);
        prov.input(&path)?;
        entries.extend(load_waic(&path, name)?);
    }
    let mut names: Vec<&str> = entries.iter().map(|(n, _, _)| n.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::usage(format!(
            "model name `{}` given twice; use NAME=PATH",
            w[0]
        )));
    }
    let rows = rank_waic(entries)?;
    let table = format_comparison(&rows);
    let out = OutputDir::new(&g.output_dir, g.force);
    let name = "waic_comparison.csv".to_string();
    out.claim(std::slice::from_ref(&name))?;
    out.write(&name, format!("{}{table}", prov.comment()).as_bytes())?;
    print!("{table}");
    Ok(())
}

pub fn cluster(
    g: &GlobalArgs,
    files: &[PathBuf],
    param: &str,
    labels: Option<Vec<String>>,
    order: u32,
) -> CliResult<()> {
    let order = WassersteinOrder::from_int(order)
        .ok_or_else(|| CliError::usage(format!("Wasserstein order must be 1 or 2, got {order}")))?;
    if files.len() < 2 {
        return Err(CliError::usage("clustering needs at least two draws files"));
    }
    let labels = match labels {
        Some(l) if l.len() != files.len() => {
            return Err(CliError::usage(format!("{} labels for {} files", l.len(), files.len())))
        }
        Some(l) => l,
        None => files
            .iter()
            .map(|p| stem_label(p, &["_barycenter_draws", "_draws"]))
            .collect(),
    };
    let mut prov = Provenance::new("cluster", None)
        .setting("param", param)
        .setting("order", if order == WassersteinOrder::One { 1 } else { 2 });
    let mut posteriors = Vec::new();
    let mut missing = Vec::new();
    for (path, label) in files.iter().zip(&labels) {
        prov.input(path)?;
        let draws = read_draws(path)?;
        match draws.column(param) {
            Ok(col) => {
                let post = EmpiricalPosterior::new(col)
                    .map_err(|e| CliError::numerical(format!("{}: {e}", path.display())))?;
                posteriors.push((label.clone(), post));
            }
            Err(_) => missing.push(path.display().to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::data(format!(
            "parameter `{param}` missing from: {}",
            missing.join(", ")
        )));
    }

    let base = format!("cluster_{}", slug(param));
    let names = [
        format!("{base}_distances.csv"),
        format!("{base}_merges.csv"),
        format!("{base}.nwk"),
    ];
    let out = OutputDir::new(&g.output_dir, g.force);
    out.claim(&names)?;

    let dm = posterior_distance_matrix(&posteriors, order)?;
    let tree = upgma(&dm)?;
    let comment = prov.comment();
    out.write(
        &names[0],
        format!("{comment}{}", format_distance_matrix(&dm)).as_bytes(),
    )?;
    out.write(&names[1], format!("{comment}{}", tree.merge_table()).as_bytes())?;
    // Newick has no line comments; bracketed text is its comment syntax.
    let newick = format!("[{}]\n{}\n", prov.line(), to_newick(&tree));
    out.write(&names[2], newick.as_bytes())?;
    Ok(())
}

fn detect(draws: &PosteriorDraws, given: Option<String>, candidates: [&str; 2], what: &str) -> CliResult<String> {
    if let Some(name) = given {
        return draws
            .index_of(&name)
            .map(|_| name.clone())
            .map_err(|_| CliError::data(format!("draws have no column `{name}`")));
    }
    candidates
        .iter()
        .find(|c| draws.index_of(c).is_ok())
        .map(|c| c.to_string())
        .ok_or_else(|| CliError::data(format!("draws have no {what} column ({})", candidates.join(" or "))))
}

pub fn acf(g: &GlobalArgs, max_lag: u32, kappa: Option<String>, eta: Option<String>) -> CliResult<()> {
    if max_lag == 0 {
        return Err(CliError::usage("--max-lag must be at least 1"));
    }
    let input = g.input("acf")?;
    let draws = read_draws(input)?;
    let kappa = detect(&draws, kappa, [KAPPA_S, KAPPA_G], "carryover")?;
    let eta = detect(&draws, eta, [ETA_S, ETA_G], "excitation")?;
    let mut prov = Provenance::new("acf", None)
        .setting("max_lag", max_lag)
        .setting("kappa", &kappa)
        .setting("eta", &eta);
    prov.input(input)?;

    let ks = draws.column(&kappa)?;
    let es = draws.column(&eta)?;
    let kept: Vec<(f64, f64)> = ks.into_iter().zip(es).filter(|&(k, e)| is_stationary(k, e)).collect();
    let excluded = 1.0 - kept.len() as f64 / draws.n_draws().max(1) as f64;
    if kept.is_empty() {
        return Err(CliError::numerical(format!(
            "all {} draws have {kappa} + {eta} >= 1; the autocorrelation is undefined",
            draws.n_draws()
        )));
    }
    if excluded > 0.0 {
        log::warn!("excluded {:.2}% non-stationary draws", 100.0 * excluded);
    }

    let name = format!("{}_acf.csv", stem_label(input, &["_draws"]));
    let out = OutputDir::new(&g.output_dir, g.force);
    out.claim(std::slice::from_ref(&name))?;

    let mut text = prov.comment();
    text.push_str("lag,mean,ci_low,ci_high,excluded_fraction\n");
    for r in 1..=max_lag {
        let values = kept
            .iter()
            .map(|&(kappa, eta)| model_acf(&IngarchParams { d: 1.0, kappa, eta }, r))
            .collect::<Result<Vec<f64>, _>>()?;
        let s = summarize(&values)?;
        text.push_str(&format!("{r},{},{},{},{excluded}\n", s.mean, s.ci_low, s.ci_high));
    }
    out.write(&name, text.as_bytes())?;
    Ok(())
}
