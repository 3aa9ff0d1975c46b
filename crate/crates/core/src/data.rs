//! Shot-event ingestion and construction of game-level and minute-level
//! count series.
//!
//! Input is a delimited table with a header row. The canonical columns are
//! `game_id,date,team,player,quarter,minute_in_quarter,made,home`; other names
//! can be mapped through [`Schema`]. Only made, regulation-time field goals
//! contribute to counts. Games are ordered by `date` (compared as text, so
//! ISO-8601 dates sort chronologically), ties broken by `game_id`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::ops::Range;

use thiserror::Error;

/// Minutes in a regulation game.
pub const MINUTES_PER_GAME: usize = 48;
/// Number of six-minute quarter-half cells in a game.
pub const QH_CELLS: usize = 8;
const REGULATION_QUARTERS: u32 = 4;
const MINUTES_PER_QUARTER: u32 = 12;

/// Quarter-half cell (0-based) of each minute of the game (0-based).
/// Minutes 1-6 map to cell 0 (first half of Q1), 43-48 to cell 7.
pub const QH_INDEX: [usize; MINUTES_PER_GAME] = {
    let mut idx = [0usize; MINUTES_PER_GAME];
    let mut m = 0;
    while m < MINUTES_PER_GAME {
        idx[m] = m / 6;
        m += 1;
    }
    idx
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("quarter {quarter} is overtime; overtime events must be filtered out")]
    Overtime { quarter: u32 },
    #[error("{what} {value} out of range")]
    OutOfRange { what: &'static str, value: u32 },
    #[error("no events match {0}")]
    EmptySelection(EntitySelector),
    #[error("game `{game_id}` has conflicting `{field}` values for {entity}")]
    InconsistentGame {
        game_id: String,
        field: &'static str,
        entity: EntitySelector,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Column-name mapping for [`parse_events`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub game_id: String,
    pub date: String,
    pub team: String,
    pub player: String,
    pub quarter: String,
    pub minute_in_quarter: String,
    pub made: String,
    pub home: String,
    pub delimiter: u8,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            game_id: "game_id".into(),
            date: "date".into(),
            team: "team".into(),
            player: "player".into(),
            quarter: "quarter".into(),
            minute_in_quarter: "minute_in_quarter".into(),
            made: "made".into(),
            home: "home".into(),
            delimiter: b',',
        }
    }
}

/// One field-goal attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotEvent {
    pub game_id: String,
    pub date: String,
    pub team: String,
    pub player: String,
    pub quarter: u32,
    /// 1-based; a shot in the first 60 seconds of a quarter is minute 1.
    pub minute_in_quarter: u32,
    pub made: bool,
    pub home: bool,
}

impl ShotEvent {
    pub fn is_overtime(&self) -> bool {
        self.quarter > REGULATION_QUARTERS
    }
}

/// Which series to build: all shots of a team, or of one player.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EntitySelector {
    Team(String),
    Player(String),
}

impl EntitySelector {
    fn matches(&self, ev: &ShotEvent) -> bool {
        match self {
            EntitySelector::Team(code) => ev.team == *code,
            EntitySelector::Player(name) => ev.player == *name,
        }
    }
}

impl fmt::Display for EntitySelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntitySelector::Team(t) => write!(f, "team `{t}`"),
            EntitySelector::Player(p) => write!(f, "player `{p}`"),
        }
    }
}

/// Per-game made field goals, in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSeries {
    pub counts: Vec<u32>,
    pub home: Vec<bool>,
    pub game_ids: Vec<String>,
}

impl GameSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Per-minute made field goals, one row of 48 minutes per game.
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteSeries {
    pub counts: Vec<[u32; MINUTES_PER_GAME]>,
    pub game_ids: Vec<String>,
}

impl MinuteSeries {
    pub fn n_games(&self) -> usize {
        self.counts.len()
    }

    pub fn qh_index(&self) -> &'static [usize; MINUTES_PER_GAME] {
        &QH_INDEX
    }

    pub fn game_totals(&self) -> Vec<u32> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }

    /// Games `range` (0-based, half-open) as a new series.
    pub fn subset(&self, range: Range<usize>) -> MinuteSeries {
        MinuteSeries {
            counts: self.counts[range.clone()].to_vec(),
            game_ids: self.game_ids[range].to_vec(),
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Parse a delimited shot table. Overtime rows are kept (see
/// [`ShotEvent::is_overtime`]); count builders drop them.
pub fn parse_events<R: Read>(source: R, schema: &Schema) -> Result<Vec<ShotEvent>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    let game_id = column(&headers, &schema.game_id)?;
    let date = column(&headers, &schema.date)?;
    let team = column(&headers, &schema.team)?;
    let player = column(&headers, &schema.player)?;
    let quarter = column(&headers, &schema.quarter)?;
    let minute = column(&headers, &schema.minute_in_quarter)?;
    let made = column(&headers, &schema.made)?;
    let home = column(&headers, &schema.home)?;

    let mut events = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let row_err = |message: String| DataError::Row { line, message };
        let int = |i: usize, name: &str| {
            field(i)
                .parse::<u32>()
                .map_err(|_| row_err(format!("`{name}`: cannot parse {:?} as integer", field(i))))
        };
        let boolean = |i: usize, name: &str| {
            parse_bool(field(i)).ok_or_else(|| row_err(format!("`{name}`: cannot parse {:?} as boolean", field(i))))
        };

        let q = int(quarter, &schema.quarter)?;
        let m = int(minute, &schema.minute_in_quarter)?;
        if q == 0 {
            return Err(row_err("quarter must be >= 1".into()));
        }
        if q <= REGULATION_QUARTERS && !(1..=MINUTES_PER_QUARTER).contains(&m) {
            return Err(row_err(format!("minute_in_quarter {m} outside 1..=12")));
        }
        events.push(ShotEvent {
            game_id: field(game_id).to_string(),
            date: field(date).to_string(),
            team: field(team).to_string(),
            player: field(player).to_string(),
            quarter: q,
            minute_in_quarter: m,
            made: boolean(made, &schema.made)?,
            home: boolean(home, &schema.home)?,
        });
    }
    Ok(events)
}

/// 1-based minute of the game for a regulation shot.
pub fn minute_of_game(quarter: u32, minute_in_quarter: u32) -> Result<usize, DataError> {
    if quarter > REGULATION_QUARTERS {
        return Err(DataError::Overtime { quarter });
    }
    if quarter == 0 {
        return Err(DataError::OutOfRange {
            what: "quarter",
            value: quarter,
        });
    }
    if !(1..=MINUTES_PER_QUARTER).contains(&minute_in_quarter) {
        return Err(DataError::OutOfRange {
            what: "minute_in_quarter",
            value: minute_in_quarter,
        });
    }
    Ok(((quarter - 1) * MINUTES_PER_QUARTER + minute_in_quarter) as usize)
}

struct GameRecord {
    game_id: String,
    date: String,
    home: bool,
    minutes: [u32; MINUTES_PER_GAME],
}

/// Games in which the entity appears (any attempt, made or missed, including
/// overtime), with regulation made-shot counts per minute.
fn collect_games(events: &[ShotEvent], entity: &EntitySelector) -> Result<Vec<GameRecord>, DataError> {
    let mut games: BTreeMap<&str, GameRecord> = BTreeMap::new();
    for ev in events.iter().filter(|ev| entity.matches(ev)) {
        let rec = games.entry(ev.game_id.as_str()).or_insert_with(|| GameRecord {
            game_id: ev.game_id.clone(),
            date: ev.date.clone(),
            home: ev.home,
            minutes: [0; MINUTES_PER_GAME],
        });
        let conflict = |field| DataError::InconsistentGame {
            game_id: ev.game_id.clone(),
            field,
            entity: entity.clone(),
        };
        if rec.date != ev.date {
            return Err(conflict("date"));
        }
        if rec.home != ev.home {
            return Err(conflict("home"));
        }
        if ev.made && !ev.is_overtime() {
            let m = minute_of_game(ev.quarter, ev.minute_in_quarter)?;
            rec.minutes[m - 1] += 1;
        }
    }
    if games.is_empty() {
        return Err(DataError::EmptySelection(entity.clone()));
    }
    let mut out: Vec<GameRecord> = games.into_values().collect();
    out.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.game_id.cmp(&b.game_id)));
    Ok(out)
}

pub fn build_game_series(events: &[ShotEvent], entity: &EntitySelector) -> Result<GameSeries, DataError> {
    let games = collect_games(events, entity)?;
    Ok(GameSeries {
        counts: games.iter().map(|g| g.minutes.iter().sum()).collect(),
        home: games.iter().map(|g| g.home).collect(),
        game_ids: games.into_iter().map(|g| g.game_id).collect(),
    })
}

pub fn build_minute_series(events: &[ShotEvent], entity: &EntitySelector) -> Result<MinuteSeries, DataError> {
    let games = collect_games(events, entity)?;
    Ok(MinuteSeries {
        counts: games.iter().map(|g| g.minutes).collect(),
        game_ids: games.into_iter().map(|g| g.game_id).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "game_id,date,team,player,quarter,minute_in_quarter,made,home\n";

    fn parse(body: &str) -> Result<Vec<ShotEvent>, DataError> {
        parse_events(format!("{HEADER}{body}").as_bytes(), &Schema::default())
    }

    fn shot(game: &str, date: &str, q: u32, m: u32, made: bool) -> ShotEvent {
        ShotEvent {
            game_id: game.into(),
            date: date.into(),
            team: "TOR".into(),
            player: "Kawhi Leonard".into(),
            quarter: q,
            minute_in_quarter: m,
            made,
            home: true,
        }
    }

    #[test]
    fn single_row() {
        let ev = parse("g1,2018-10-16,TOR,Kawhi Leonard,1,3,1,TRUE\n").unwrap();
        assert_eq!(ev.len(), 1);
        assert!(ev[0].made && ev[0].home);
        assert_eq!((ev[0].quarter, ev[0].minute_in_quarter), (1, 3));
    }

    #[test]
    fn overtime_rows_are_kept_and_flagged() {
        let ev = parse("g1,2018-10-16,TOR,A,5,2,1,0\n").unwrap();
        assert!(ev[0].is_overtime());
    }

    #[test]
    fn malformed_integer_reports_line() {
        let err = parse("g1,2018-10-16,TOR,A,1,3,1,0\ng1,2018-10-16,TOR,A,1,abc,1,0\n").unwrap_err();
        match err {
            DataError::Row { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("minute_in_quarter"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_events(
            "game_id,date,team,player,quarter,made,home\n".as_bytes(),
            &Schema::default(),
        )
        .unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(c) if c == "minute_in_quarter"));
    }

    #[test]
    fn custom_schema_and_delimiter() {
        let schema = Schema {
            game_id: "GAME".into(),
            delimiter: b';',
            ..Schema::default()
        };
        let src = "GAME;date;team;player;quarter;minute_in_quarter;made;home\nx;d;BOS;P;2;1;false;1\n";
        let ev = parse_events(src.as_bytes(), &schema).unwrap();
        assert_eq!(ev[0].game_id, "x");
        assert!(!ev[0].made);
    }

    #[test]
    fn minute_of_game_mapping() {
        assert_eq!(minute_of_game(1, 1).unwrap(), 1);
        assert_eq!(minute_of_game(4, 12).unwrap(), 48);
        assert_eq!(minute_of_game(2, 3).unwrap(), 15);
        assert!(matches!(minute_of_game(5, 1), Err(DataError::Overtime { quarter: 5 })));
        assert!(minute_of_game(1, 13).is_err());
    }

    #[test]
    fn qh_index_layout() {
        assert_eq!(QH_INDEX[0], 0);
        assert_eq!(QH_INDEX[5], 0);
        assert_eq!(QH_INDEX[6], 1);
        assert_eq!(QH_INDEX[12], 2);
        assert_eq!(QH_INDEX[47], 7);
    }

    #[test]
    fn single_game_count() {
        let events: Vec<_> = (0..10)
            .map(|i| shot("g1", "2019-01-01", 1 + i % 4, 1 + i, true))
            .collect();
        let gs = build_game_series(&events, &EntitySelector::Team("TOR".into())).unwrap();
        assert_eq!(gs.counts, vec![10]);
    }

    #[test]
    fn minute_series_places_shot() {
        let events = vec![shot("g1", "2019-01-01", 2, 3, true)];
        let ms = build_minute_series(&events, &EntitySelector::Team("TOR".into())).unwrap();
        let mut expected = [0u32; 48];
        expected[14] = 1;
        assert_eq!(ms.counts, vec![expected]);
    }

    #[test]
    fn zero_score_game_and_overtime_excluded() {
        let events = vec![
            shot("g2", "2019-01-03", 1, 1, false),
            shot("g1", "2019-01-01", 4, 12, true),
            shot("g1", "2019-01-01", 5, 2, true),
        ];
        let sel = EntitySelector::Player("Kawhi Leonard".into());
        let gs = build_game_series(&events, &sel).unwrap();
        assert_eq!(gs.game_ids, vec!["g1", "g2"]);
        assert_eq!(gs.counts, vec![1, 0]);
        let ms = build_minute_series(&events, &sel).unwrap();
        assert_eq!(ms.counts[1], [0; 48]);
        assert_eq!(ms.game_totals(), gs.counts);
    }

    #[test]
    fn ordering_by_date_then_id() {
        let events = vec![
            shot("b", "2019-01-02", 1, 1, true),
            shot("c", "2019-01-01", 1, 1, true),
            shot("a", "2019-01-02", 1, 1, true),
        ];
        let gs = build_game_series(&events, &EntitySelector::Team("TOR".into())).unwrap();
        assert_eq!(gs.game_ids, vec!["c", "a", "b"]);
    }

    #[test]
    fn empty_selection() {
        let events = vec![shot("g1", "2019-01-01", 1, 1, true)];
        let err = build_game_series(&events, &EntitySelector::Team("BOS".into())).unwrap_err();
        assert!(matches!(err, DataError::EmptySelection(_)));
    }

    #[test]
    fn conflicting_home_flag() {
        let mut b = shot("g1", "2019-01-01", 1, 2, true);
        b.home = false;
        let events = vec![shot("g1", "2019-01-01", 1, 1, true), b];
        let err = build_game_series(&events, &EntitySelector::Team("TOR".into())).unwrap_err();
        assert!(matches!(err, DataError::InconsistentGame { field: "home", .. }));
    }
}
