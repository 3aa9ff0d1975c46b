//! `simulate`: synthetic shot files from a truth file.
//!
//! ```toml
//! team = "SIM"            # optional
//! games = 82
//! start_date = "2018-10-16"  # optional
//!
//! [game]                  # exactly one of [game] or [minute]
//! alpha_S = 2.4849
//! alpha_Home = 0.05
//! kappa_S = 0.3
//! eta_S = 0.2
//!
//! [minute]
//! alpha_G = 0.5
//! alpha_QH = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
//! kappa_G = 0.3
//! eta_G = 0.25
//! offsets = [40.0, ...]   # one per game, or a scalar `offset`
//! ```

use std::fmt::Write as _;
use std::fs;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use dse_core::data::MINUTES_PER_GAME;
use dse_core::io;
use dse_core::model::{simulate_game_series, simulate_minute_series, GameParams, MinuteParams};

use crate::error::{CliError, CliResult};
use crate::output::{slug, OutputDir, Provenance};
use crate::GlobalArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Truth {
    #[serde(default = "default_team")]
    team: String,
    games: usize,
    #[serde(default = "default_start")]
    start_date: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    game: Option<GameTruth>,
    #[serde(skip_serializing_if = "Option::is_none")]
    minute: Option<MinuteTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct GameTruth {
    alpha_S: f64,
    alpha_Home: f64,
    kappa_S: f64,
    eta_S: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct MinuteTruth {
    alpha_G: f64,
    alpha_QH: [f64; 7],
    kappa_G: f64,
    eta_G: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offsets: Option<Vec<f64>>,
}

fn default_team() -> String {
    "SIM".into()
}

fn default_start() -> String {
    "2018-10-16".into()
}

fn check_excitation(kappa: f64, eta: f64) -> CliResult<()> {
    if !(kappa >= 0.0 && eta >= 0.0 && kappa + eta < 1.0) {
        return Err(CliError::data(format!(
            "carryover {kappa} and excitation {eta} must be nonnegative with sum below 1"
        )));
    }
    Ok(())
}

impl Truth {
    fn validate(&self) -> CliResult<()> {
        if self.games == 0 {
            return Err(CliError::data("truth file: `games` must be positive"));
        }
        let mut values: Vec<f64> = Vec::new();
        match (&self.game, &self.minute) {
            (Some(p), None) => {
                values.extend([p.alpha_S, p.alpha_Home, p.kappa_S, p.eta_S]);
                check_excitation(p.kappa_S, p.eta_S)?;
            }
            (None, Some(p)) => {
                values.extend([p.alpha_G, p.kappa_G, p.eta_G]);
                values.extend(p.alpha_QH);
                check_excitation(p.kappa_G, p.eta_G)?;
                let offsets = p.resolved_offsets(self.games)?;
                if offsets.len() != self.games {
                    return Err(CliError::data(format!(
                        "truth file: {} offsets for {} games",
                        offsets.len(),
                        self.games
                    )));
                }
                if offsets.iter().any(|o| *o < 0.0) {
                    return Err(CliError::data("truth file: offsets must be nonnegative"));
                }
                values.extend(offsets);
            }
            _ => return Err(CliError::data("truth file needs exactly one of [game] or [minute]")),
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(CliError::data(format!("truth file: non-finite parameter {v}")));
        }
        Ok(())
    }
}

impl MinuteTruth {
    fn resolved_offsets(&self, games: usize) -> CliResult<Vec<f64>> {
        match (&self.offsets, self.offset) {
            (Some(v), None) => Ok(v.clone()),
            (None, Some(o)) => Ok(vec![o; games]),
            _ => Err(CliError::data("truth file: give exactly one of `offset` or `offsets`")),
        }
    }
}

struct Shot {
    minute: usize,
    made: bool,
}

/// Shot rows of one game. A missed attempt in the opening minute keeps games
/// without a made shot visible in the file.
fn shot_rows(out: &mut String, id: &str, date: &str, team: &str, home: bool, shots: &[Shot]) {
    for s in std::iter::once(&Shot { minute: 0, made: false }).chain(shots) {
        let (q, m) = (s.minute / 12 + 1, s.minute % 12 + 1);
        let _ = writeln!(
            out,
            "{id},{date},{team},{team}-player,{q},{m},{},{}",
            s.made as u8, home as u8
        );
    }
}

pub fn simulate(g: &GlobalArgs) -> CliResult<()> {
    let seed = g.seed("simulate")?;
    let input = g.input("simulate")?;
    let text =
        fs::read_to_string(input).map_err(|e| CliError::data(format!("cannot read {}: {e}", input.display())))?;
    let mut truth: Truth = toml::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", input.display())))?;
    truth.validate()?;
    let start = NaiveDate::parse_from_str(&truth.start_date, "%Y-%m-%d")
        .map_err(|e| CliError::data(format!("truth file: start_date: {e}")))?;
    let mut prov = Provenance::new("simulate", Some(seed));
    prov.input(input)?;

    let team = slug(&truth.team);
    truth.team = team.clone();
    let mut names = vec![format!("{team}_shots.csv"), format!("{team}_truth.toml")];
    if truth.minute.is_some() {
        names.push(format!("{team}_offsets.csv"));
    }
    let out = OutputDir::new(&g.output_dir, g.force);
    out.claim(&names)?;

    let home: Vec<bool> = (0..truth.games).map(|g| g % 2 == 0).collect();
    let dates: Vec<String> = (0..truth.games as u64)
        .map(|d| {
            start
                .checked_add_days(Days::new(d))
                .map(|x| x.format("%Y-%m-%d").to_string())
                .ok_or_else(|| CliError::data("truth file: season runs past the calendar"))
        })
        .collect::<CliResult<_>>()?;

    let mut csv = prov.comment();
    csv.push_str("game_id,date,team,player,quarter,minute_in_quarter,made,home\n");
    if let Some(p) = &truth.game {
        let params = GameParams {
            alpha_season: p.alpha_S,
            alpha_home: p.alpha_Home,
            kappa: p.kappa_S,
            eta: p.eta_S,
        };
        let y = simulate_game_series(&params, &home, seed);
        for (gi, &count) in y.counts.iter().enumerate() {
            // Spread made shots evenly over regulation.
            let shots: Vec<Shot> = (0..count as usize)
                .map(|k| Shot {
                    minute: k * MINUTES_PER_GAME / count as usize,
                    made: true,
                })
                .collect();
            shot_rows(&mut csv, &y.game_ids[gi], &dates[gi], &team, home[gi], &shots);
        }
    }
    if let Some(p) = &truth.minute {
        let params = MinuteParams {
            alpha_game: p.alpha_G,
            alpha_qh: p.alpha_QH,
            kappa: p.kappa_G,
            eta: p.eta_G,
        };
        let offsets = p.resolved_offsets(truth.games)?;
        let y = simulate_minute_series(&params, &offsets, seed);
        for (gi, row) in y.counts.iter().enumerate() {
            let shots: Vec<Shot> = row
                .iter()
                .enumerate()
                .flat_map(|(m, &c)| (0..c).map(move |_| Shot { minute: m, made: true }))
                .collect();
            shot_rows(&mut csv, &y.game_ids[gi], &dates[gi], &team, home[gi], &shots);
        }
        let mut buf = Vec::new();
        io::write_game_rates(&mut buf, &y.game_ids, &offsets, Some(&prov.line()))?;
        out.write(&names[2], &buf)?;
    }
    out.write(&names[0], csv.as_bytes())?;
    let toml_text = toml::to_string(&truth).map_err(|e| CliError::data(format!("cannot encode truth: {e}")))?;
    out.write(&names[1], format!("{}{toml_text}", prov.comment()).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_round_trips_through_toml() {
        let t: Truth = toml::from_str(
            "games = 3\n[minute]\nalpha_G = 0.5\nalpha_QH = [0,0,0,0,0,0,0.1]\nkappa_G = 0.3\neta_G = 0.2\noffset = 40\n",
        )
        .unwrap();
        t.validate().unwrap();
        assert_eq!(t.minute.as_ref().unwrap().resolved_offsets(3).unwrap(), vec![40.0; 3]);
        let back: Truth = toml::from_str(&toml::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_truth() {
        let both = "games = 2\n[game]\nalpha_S = 1\nalpha_Home = 0\nkappa_S = 0.1\neta_S = 0.1\n\
                    [minute]\nalpha_G = 0\nalpha_QH = [0,0,0,0,0,0,0]\nkappa_G = 0\neta_G = 0\noffset = 1\n";
        assert!(toml::from_str::<Truth>(both).unwrap().validate().is_err());
        let explosive = "games = 2\n[game]\nalpha_S = 1\nalpha_Home = 0\nkappa_S = 0.6\neta_S = 0.5\n";
        assert!(toml::from_str::<Truth>(explosive).unwrap().validate().is_err());
        let nan = "games = 2\n[game]\nalpha_S = nan\nalpha_Home = 0\nkappa_S = 0.1\neta_S = 0.1\n";
        assert!(toml::from_str::<Truth>(nan).unwrap().validate().is_err());
    }
}
