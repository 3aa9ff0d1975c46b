//! `fit-game` and `fit-minute`.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use dse_core::compare::Waic;
use dse_core::data::{self, GameSeries, Schema, ShotEvent};
use dse_core::inference::{
    diagnostics, fit_game_model, posterior_mean_game_rates, stationarity_probability, summarize, waic_from_draws, Fit,
    McmcConfig, MinuteModel, PosteriorDraws, PriorSpec, ETA_G, ETA_S, KAPPA_G, KAPPA_S,
};
use dse_core::io;
use dse_core::merge::{default_partition, fit_partitioned_minute_model, GamePartition};

use crate::error::{CliError, CliResult};
use crate::output::{slug, OutputDir, Provenance};
use crate::{EntityArgs, GlobalArgs};

const RHAT_WARN: f64 = 1.05;

fn read_events(path: &Path) -> CliResult<Vec<ShotEvent>> {
    let file = File::open(path).map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    Ok(data::parse_events(BufReader::new(file), &Schema::default())?)
}

fn fit_provenance(command: &'static str, g: &GlobalArgs, seed: u64, entity: &EntityArgs) -> Provenance {
    let kind = if entity.team.is_some() { "team" } else { "player" };
    Provenance::new(command, Some(seed))
        .setting(kind, format!("{:?}", entity.name()))
        .setting("model", g.model_label())
        .setting("chains", g.chains)
        .setting("iters", g.iters)
        .setting("burnin", g.burnin)
        .setting("thin", g.thin)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// `param,mean,ci_low,ci_high,rhat,ess` for every column of `draws`.
fn summary_table(draws: &PosteriorDraws, with_diagnostics: bool, prov: &Provenance) -> CliResult<String> {
    let diag = if with_diagnostics {
        Some(diagnostics(draws)?)
    } else {
        None
    };
    let mut out = prov.comment();
    out.push_str("param,mean,ci_low,ci_high,rhat,ess\n");
    for (j, name) in draws.param_names.iter().enumerate() {
        let s = summarize(&draws.column(name)?)?;
        let (rhat, ess) = match &diag {
            Some(d) => {
                if let Some(r) = d[j].rhat.filter(|r| *r > RHAT_WARN) {
                    log::warn!("{name}: split R-hat {r:.3} above {RHAT_WARN}; consider more iterations");
                }
                (d[j].rhat, Some(d[j].ess))
            }
            None => (None, None),
        };
        out.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            s.mean,
            s.ci_low,
            s.ci_high,
            fmt_opt(rhat),
            fmt_opt(ess)
        ));
    }
    Ok(out)
}

fn waic_table(label: &str, n_obs: usize, w: &Waic, prov: &Provenance) -> String {
    format!(
        "{}model,n_obs,waic,lppd,p_waic\n{label},{n_obs},{},{},{}\n",
        prov.comment(),
        w.waic,
        w.lppd,
        w.p_waic
    )
}

fn draws_file(draws: &PosteriorDraws, prov: &Provenance) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    io::write_draws(&mut buf, draws, Some(&prov.line()))?;
    Ok(buf)
}

pub fn game_prefix(entity: &EntityArgs, model: &str) -> String {
    format!("{}_game_{model}", slug(entity.name()))
}

fn run_game_fit(y: &GameSeries, g: &GlobalArgs, cfg: &McmcConfig) -> CliResult<Fit> {
    Ok(fit_game_model(y, &PriorSpec::default(), cfg, g.baseline)?)
}

pub fn fit_game(g: &GlobalArgs, entity: &EntityArgs) -> CliResult<()> {
    let seed = g.seed("fit-game")?;
    let input = g.input("fit-game")?;
    let cfg = g.mcmc(seed)?;
    let mut prov = fit_provenance("fit-game", g, seed, entity);
    prov.input(input)?;

    let events = read_events(input)?;
    let y = data::build_game_series(&events, &entity.selector())?;
    log::info!("{} games for {}", y.len(), entity.selector());

    let prefix = game_prefix(entity, g.model_label());
    let mut names: Vec<String> = ["draws", "loglik", "summary", "rates", "waic"]
        .iter()
        .map(|s| format!("{prefix}_{s}.csv"))
        .collect();
    if !g.baseline {
        names.push(format!("{prefix}_stationarity.csv"));
    }
    let out = OutputDir::new(&g.output_dir, g.force);
    out.claim(&names)?;

    let fit = run_game_fit(&y, g, &cfg)?;
    let ll = fit.pointwise.as_ref().expect("pointwise log-likelihood is stored");
    let w = dse_core::compare::waic(ll)?;
    let rates = posterior_mean_game_rates(&fit.draws, &y)?;

    out.write(&names[0], &draws_file(&fit.draws, &prov)?)?;
    let mut buf = Vec::new();
    io::write_loglik(&mut buf, &fit.draws, ll, Some(&prov.line()))?;
    out.write(&names[1], &buf)?;
    out.write(&names[2], summary_table(&fit.draws, true, &prov)?.as_bytes())?;
    let mut buf = Vec::new();
    io::write_game_rates(&mut buf, &y.game_ids, &rates, Some(&prov.line()))?;
    out.write(&names[3], &buf)?;
    out.write(&names[4], waic_table(&prefix, y.len(), &w, &prov).as_bytes())?;
    if !g.baseline {
        let p = stationarity_probability(&fit.draws, KAPPA_S, ETA_S)?;
        let text = format!("{}scope,probability\nseason,{p}\n", prov.comment());
        out.write(&names[5], text.as_bytes())?;
    }
    Ok(())
}

/// Per-game offsets keyed by game id, from a rate table.
fn read_offsets(path: &Path) -> CliResult<HashMap<String, f64>> {
    let file = File::open(path).map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let (ids, rates) = io::read_game_rates(BufReader::new(file))?;
    Ok(ids.into_iter().zip(rates).collect())
}

pub fn fit_minute(g: &GlobalArgs, entity: &EntityArgs, offsets: Option<&Path>, derive: bool) -> CliResult<()> {
    let seed = g.seed("fit-minute")?;
    let input = g.input("fit-minute")?;
    let cfg = McmcConfig {
        store_pointwise: false,
        ..g.mcmc(seed)?
    };
    let mut prov = fit_provenance("fit-minute", g, seed, entity);
    prov.input(input)?;

    let events = read_events(input)?;
    let selector = entity.selector();
    let y = data::build_minute_series(&events, &selector)?;

    let game_rates = if derive {
        prov = prov.setting("offsets", "derived");
        let games = data::build_game_series(&events, &selector)?;
        let fit = run_game_fit(&games, g, &cfg)?;
        let rates = posterior_mean_game_rates(&fit.draws, &games)?;
        games.game_ids.into_iter().zip(rates).collect()
    } else {
        let default = g
            .output_dir
            .join(format!("{}_rates.csv", game_prefix(entity, g.model_label())));
        let path = offsets.map_or(default, Path::to_path_buf);
        if !path.exists() {
            return Err(CliError::usage(format!(
                "offset table {} not found; run `dse fit-game` for this entity first, \
                 or pass --offsets or --derive-offsets",
                path.display()
            )));
        }
        prov.input(&path)?;
        read_offsets(&path)?
    };
    let offsets: Vec<f64> = y
        .game_ids
        .iter()
        .map(|id| {
            game_rates
                .get(id)
                .copied()
                .ok_or_else(|| CliError::data(format!("offset table has no rate for game `{id}`")))
        })
        .collect::<CliResult<_>>()?;

    let partition = match &g.partition {
        Some(spec) => GamePartition::parse(spec, y.n_games())?,
        None => default_partition(y.n_games())?,
    };
    let prov = prov.setting("partition", &partition);

    let prefix = format!("{}_minute_{}", slug(entity.name()), g.model_label());
    let k = partition.len();
    let mut names = Vec::new();
    for b in 1..=k {
        names.push(format!("{prefix}_block{b}_draws.csv"));
        names.push(format!("{prefix}_block{b}_summary.csv"));
    }
    for s in ["barycenter_draws", "summary", "waic"] {
        names.push(format!("{prefix}_{s}.csv"));
    }
    if !g.baseline {
        names.push(format!("{prefix}_stationarity.csv"));
    }
    let out = OutputDir::new(&g.output_dir, g.force);
    out.claim(&names)?;

    let fit = fit_partitioned_minute_model(&y, &offsets, &partition, &PriorSpec::default(), &cfg, g.baseline)?;

    let mut total = Waic {
        waic: 0.0,
        lppd: 0.0,
        p_waic: 0.0,
    };
    let mut stationarity = String::new();
    for (b, (range, block)) in partition.blocks().iter().zip(&fit.blocks).enumerate() {
        out.write(&names[2 * b], &draws_file(&block.draws, &prov)?)?;
        out.write(&names[2 * b + 1], summary_table(&block.draws, true, &prov)?.as_bytes())?;
        let sub = y.subset(range.clone());
        let model = MinuteModel::new(&sub, &offsets[range.clone()], g.baseline)?;
        let w = waic_from_draws(&model, &block.draws)?;
        total.waic += w.waic;
        total.lppd += w.lppd;
        total.p_waic += w.p_waic;
        if !g.baseline {
            let p = stationarity_probability(&block.draws, KAPPA_G, ETA_G)?;
            stationarity.push_str(&format!("block{},{p}\n", b + 1));
        }
    }
    let bary = io::barycenter_draws(&fit.barycenters)?;
    out.write(&names[2 * k], &draws_file(&bary, &prov)?)?;
    out.write(&names[2 * k + 1], summary_table(&bary, false, &prov)?.as_bytes())?;
    let n_obs = y.n_games() * data::MINUTES_PER_GAME;
    out.write(&names[2 * k + 2], waic_table(&prefix, n_obs, &total, &prov).as_bytes())?;
    if !g.baseline {
        let text = format!("{}scope,probability\n{stationarity}", prov.comment());
        out.write(&names[2 * k + 3], text.as_bytes())?;
    }
    Ok(())
}
