//! CSV snapshot ingestion: parsing, merging, cleaning, and salary-share
//! construction.
//!
//! Four files feed one season: a statistics table for one [`StatKind`],
//! a salary table, a team payroll table, and an experience table. A
//! player is kept only if present in all three player-level sources;
//! multi-team players keep the stat row of the team that pays them and
//! aggregate "TOT" rows are always discarded. Records with fewer than
//! `min_games` appearances are dropped. When a team's listed salaries
//! sum above its reported payroll, the payroll is replaced by that sum
//! so per-team shares can never exceed one.
//!
//! Join key is the normalized player name (lowercased, diacritics
//! folded, suffixes retained) plus the season tag; a duplicated name
//! inside one source is an error rather than a guess.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ResponseScale, Task};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Class threshold: a share at or above 5% of the payroll is "high".
pub const DEFAULT_CLASS_THRESHOLD: f64 = 0.05;
pub const DEFAULT_MIN_GAMES: u32 = 10;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatKind {
    PerGame,
    Per36,
    Per100,
    Advanced,
}

impl StatKind {
    pub fn all() -> [StatKind; 4] {
        [
            StatKind::PerGame,
            StatKind::Per36,
            StatKind::Per100,
            StatKind::Advanced,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            StatKind::PerGame => "per-game",
            StatKind::Per36 => "per-36",
            StatKind::Per100 => "per-100",
            StatKind::Advanced => "advanced",
        }
    }
}

impl FromStr for StatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "per-game" | "per_game" | "pergame" => Ok(StatKind::PerGame),
            "per-36" | "per_36" | "per36" => Ok(StatKind::Per36),
            "per-100" | "per_100" | "per100" => Ok(StatKind::Per100),
            "advanced" => Ok(StatKind::Advanced),
            other => Err(Error::Config(format!(
                "unknown statistics kind {other:?}; expected per-game, per-36, per-100 or advanced"
            ))),
        }
    }
}

impl std::fmt::Display for StatKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One line of a statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawStatRow {
    pub player_name: String,
    pub season: String,
    pub team: String,
    pub position: String,
    pub age: Option<u32>,
    pub games: u32,
    pub games_started: Option<u32>,
    pub minutes: f64,
    /// Remaining numeric columns in header order; empty cells are None.
    pub features: IndexMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalaryRow {
    pub player_name: String,
    pub season: String,
    pub team: String,
    pub salary_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayrollRow {
    pub team: String,
    pub season: String,
    pub payroll_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceRow {
    pub player_name: String,
    pub season: String,
    pub experience_years: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShareClass {
    Low,
    High,
}

/// A fully merged player-season observation for one statistics kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerSeasonRecord {
    pub player_name: String,
    pub normalized_name: String,
    pub season: String,
    pub kind: StatKind,
    pub team: String,
    pub position: String,
    pub age: Option<u32>,
    pub experience_years: u32,
    pub games: u32,
    pub games_started: Option<u32>,
    pub minutes: f64,
    pub features: IndexMap<String, Option<f64>>,
    pub salary_usd: f64,
    /// Effective payroll once shares are computed (reported payroll
    /// before that).
    pub payroll_usd: f64,
    pub salary_share: Option<f64>,
    pub share_class: Option<ShareClass>,
}

/// A payroll replaced by the sum of its listed salaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayrollCorrection {
    pub team: String,
    pub reported: f64,
    pub effective: f64,
}

/// Counts of what each pipeline rule dropped or changed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CleanLog {
    pub stat_rows: usize,
    pub tot_rows_discarded: usize,
    pub salary_rows: usize,
    pub dropped_missing_stats: usize,
    pub dropped_missing_experience: usize,
    pub dropped_team_mismatch: usize,
    pub dropped_zero_salary: usize,
    pub merged: usize,
    pub dropped_low_games: usize,
    pub payroll_corrections: Vec<PayrollCorrection>,
    pub cleaned: usize,
}

impl CleanLog {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "stat rows read:              {}\n",
            self.stat_rows
        ));
        out.push_str(&format!(
            "aggregate TOT rows dropped:  {}\n",
            self.tot_rows_discarded
        ));
        out.push_str(&format!(
            "salary rows read:            {}\n",
            self.salary_rows
        ));
        out.push_str(&format!(
            "dropped (no stats row):      {}\n",
            self.dropped_missing_stats
        ));
        out.push_str(&format!(
            "dropped (no experience):     {}\n",
            self.dropped_missing_experience
        ));
        out.push_str(&format!(
            "dropped (team mismatch):     {}\n",
            self.dropped_team_mismatch
        ));
        out.push_str(&format!(
            "dropped (non-positive pay):  {}\n",
            self.dropped_zero_salary
        ));
        out.push_str(&format!("merged records:              {}\n", self.merged));
        out.push_str(&format!(
            "dropped (too few games):     {}\n",
            self.dropped_low_games
        ));
        for c in &self.payroll_corrections {
            out.push_str(&format!(
                "payroll corrected for {}: {} -> {}\n",
                c.team, c.reported, c.effective
            ));
        }
        out.push_str(&format!("cleaned records:             {}\n", self.cleaned));
        out
    }
}

// ---------------------------------------------------------------------------
// Name normalization
// ---------------------------------------------------------------------------

/// Lowercase and fold Latin diacritics; suffixes like "Jr." survive.
pub fn normalize_name(name: &str) -> String {
    name.trim()
        .chars()
        .flat_map(fold_char)
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn fold_char(c: char) -> std::option::IntoIter<char> {
    let folded = match c {
        'á' | 'à' | 'â' | 'ä' | 'ã' | 'å' | 'ā' | 'ă' | 'Á' | 'À' | 'Â' | 'Ä' | 'Ã' | 'Å' | 'Ā' => {
            'a'
        }
        'é' | 'è' | 'ê' | 'ë' | 'ē' | 'ė' | 'ę' | 'É' | 'È' | 'Ê' | 'Ë' | 'Ē' => 'e',
        'í' | 'ì' | 'î' | 'ï' | 'ī' | 'Í' | 'Ì' | 'Î' | 'Ï' => 'i',
        'ó' | 'ò' | 'ô' | 'ö' | 'õ' | 'ō' | 'Ó' | 'Ò' | 'Ô' | 'Ö' | 'Õ' => 'o',
        'ú' | 'ù' | 'û' | 'ü' | 'ū' | 'Ú' | 'Ù' | 'Û' | 'Ü' => 'u',
        'ý' | 'ÿ' | 'Ý' => 'y',
        'ç' | 'ć' | 'č' | 'Ç' | 'Ć' | 'Č' => 'c',
        'ñ' | 'ń' | 'ņ' | 'Ñ' => 'n',
        'š' | 'ś' | 'Š' | 'Ś' => 's',
        'ž' | 'ź' | 'ż' | 'Ž' => 'z',
        'đ' | 'Đ' => 'd',
        'ğ' | 'ģ' | 'Ğ' => 'g',
        'ł' | 'Ł' => 'l',
        'ť' | 'Ť' => 't',
        'ř' | 'Ř' => 'r',
        other => other.to_ascii_lowercase(),
    };
    Some(folded).into_iter()
}

// ---------------------------------------------------------------------------
// CSV parsing
// ---------------------------------------------------------------------------

/// Ratio statistics that must lie inside [0,1] when present.
const UNIT_INTERVAL_COLUMNS: [&str; 7] = ["FG%", "3P%", "2P%", "eFG%", "FT%", "TS%", "WS/48"];

/// Columns mapped to dedicated fields rather than the feature map.
const META_COLUMNS: [&str; 8] = ["Rk", "Player", "Tm", "Pos", "Age", "G", "GS", "MP"];

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source)
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn require_column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    header_index(headers, name).ok_or_else(|| Error::MissingColumn {
        column: name.to_string(),
    })
}

fn parse_number(cell: &str, column: &str, line: usize) -> Result<f64> {
    let cleaned = cell.trim().trim_start_matches('$').replace(',', "");
    cleaned
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("non-numeric value in column {column}, line {line}")))
}

fn parse_count(cell: &str, column: &str, line: usize) -> Result<u32> {
    let v = parse_number(cell, column, line)?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(Error::Parse(format!(
            "expected a non-negative integer in column {column}, line {line}, got {cell}"
        )));
    }
    Ok(v as u32)
}

/// Parse one season's statistics table for a given kind.
///
/// Mandatory columns: Player, Tm, G, MP. Pos, Age and GS are optional;
/// every other column becomes a named numeric feature, with empty cells
/// preserved as explicit nulls.
pub fn parse_stats_csv<R: Read>(
    source: R,
    kind: StatKind,
    season: &str,
) -> Result<Vec<RawStatRow>> {
    let mut reader = csv_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("unreadable header: {e}")))?
        .clone();

    let player_col = require_column(&headers, "Player")?;
    let team_col = require_column(&headers, "Tm")?;
    let games_col = require_column(&headers, "G")?;
    let minutes_col = require_column(&headers, "MP")?;
    let pos_col = header_index(&headers, "Pos");
    let age_col = header_index(&headers, "Age");
    let gs_col = header_index(&headers, "GS");

    let feature_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| !META_COLUMNS.contains(h))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    for (_, name) in &feature_cols {
        let allowed = match name.as_str() {
            "eFG%" => kind == StatKind::PerGame,
            "ORtg" | "DRtg" => kind == StatKind::Per100,
            _ => true,
        };
        if !allowed {
            return Err(Error::Parse(format!(
                "column {name} is not valid for {kind} statistics"
            )));
        }
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record =
            record.map_err(|e| Error::Parse(format!("bad CSV record, line {line}: {e}")))?;
        let cell = |idx: usize| record.get(idx).unwrap_or("");

        let games = parse_count(cell(games_col), "G", line)?;
        let games_started = match gs_col {
            Some(c) if !cell(c).is_empty() => Some(parse_count(cell(c), "GS", line)?),
            _ => None,
        };
        if let Some(gs) = games_started {
            if gs > games {
                return Err(Error::Parse(format!(
                    "games started exceeds games played, line {line}"
                )));
            }
        }
        let age = match age_col {
            Some(c) if !cell(c).is_empty() => Some(parse_count(cell(c), "Age", line)?),
            _ => None,
        };
        let minutes = parse_number(cell(minutes_col), "MP", line)?;

        let mut features = IndexMap::with_capacity(feature_cols.len());
        for (idx, name) in &feature_cols {
            let raw = cell(*idx);
            let value = if raw.is_empty() {
                None
            } else {
                let v = parse_number(raw, name, line)?;
                if UNIT_INTERVAL_COLUMNS.contains(&name.as_str()) && !(0.0..=1.0).contains(&v) {
                    return Err(Error::Parse(format!(
                        "value out of range [0,1] in column {name}, line {line}"
                    )));
                }
                Some(v)
            };
            features.insert(name.clone(), value);
        }

        rows.push(RawStatRow {
            player_name: cell(player_col).to_string(),
            season: season.to_string(),
            team: cell(team_col).to_string(),
            position: pos_col.map(cell).unwrap_or("").to_string(),
            age,
            games,
            games_started,
            minutes,
            features,
        });
    }
    Ok(rows)
}

pub fn parse_salary_csv<R: Read>(source: R, season: &str) -> Result<Vec<SalaryRow>> {
    let mut reader = csv_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("unreadable header: {e}")))?
        .clone();
    let player_col = require_column(&headers, "Player")?;
    let team_col = require_column(&headers, "Tm")?;
    let salary_col = require_column(&headers, "Salary")?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record =
            record.map_err(|e| Error::Parse(format!("bad CSV record, line {line}: {e}")))?;
        let salary = parse_number(record.get(salary_col).unwrap_or(""), "Salary", line)?;
        if salary < 0.0 {
            return Err(Error::Parse(format!("negative salary, line {line}")));
        }
        rows.push(SalaryRow {
            player_name: record.get(player_col).unwrap_or("").to_string(),
            season: season.to_string(),
            team: record.get(team_col).unwrap_or("").to_string(),
            salary_usd: salary,
        });
    }
    Ok(rows)
}

pub fn parse_payroll_csv<R: Read>(source: R, season: &str) -> Result<Vec<PayrollRow>> {
    let mut reader = csv_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("unreadable header: {e}")))?
        .clone();
    let team_col = require_column(&headers, "Tm")?;
    let payroll_col = require_column(&headers, "Payroll")?;

    let mut seen = BTreeMap::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record =
            record.map_err(|e| Error::Parse(format!("bad CSV record, line {line}: {e}")))?;
        let team = record.get(team_col).unwrap_or("").to_string();
        let payroll = parse_number(record.get(payroll_col).unwrap_or(""), "Payroll", line)?;
        if payroll <= 0.0 {
            return Err(Error::Parse(format!(
                "payroll must be positive for team {team}, line {line}"
            )));
        }
        if let Some(prev) = seen.insert(team.clone(), line) {
            return Err(Error::Parse(format!(
                "duplicate payroll rows for team {team} (lines {prev} and {line})"
            )));
        }
        rows.push(PayrollRow {
            team,
            season: season.to_string(),
            payroll_usd: payroll,
        });
    }
    Ok(rows)
}

pub fn parse_experience_csv<R: Read>(source: R, season: &str) -> Result<Vec<ExperienceRow>> {
    let mut reader = csv_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("unreadable header: {e}")))?
        .clone();
    let player_col = require_column(&headers, "Player")?;
    let exp_col = require_column(&headers, "EXP")?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record =
            record.map_err(|e| Error::Parse(format!("bad CSV record, line {line}: {e}")))?;
        let exp = parse_count(record.get(exp_col).unwrap_or(""), "EXP", line)?;
        if exp > 25 {
            return Err(Error::Parse(format!(
                "implausible experience {exp} years, line {line}"
            )));
        }
        rows.push(ExperienceRow {
            player_name: record.get(player_col).unwrap_or("").to_string(),
            season: season.to_string(),
            experience_years: exp,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Merge, clean, shares
// ---------------------------------------------------------------------------

/// Join the three player-level sources and the payroll table for one
/// season. Keeps only players present in stats, salaries and
/// experience; resolves multi-team players to the stat row of the
/// paying team.
pub fn merge_sources(
    stats: &[RawStatRow],
    salaries: &[SalaryRow],
    payrolls: &[PayrollRow],
    experience: &[ExperienceRow],
    season: &str,
    kind: StatKind,
) -> Result<(Vec<PlayerSeasonRecord>, CleanLog)> {
    let mut log = CleanLog {
        stat_rows: stats.len(),
        salary_rows: salaries.len(),
        ..CleanLog::default()
    };

    for row_season in stats.iter().map(|r| r.season.as_str()).chain(
        salaries
            .iter()
            .map(|r| r.season.as_str())
            .chain(experience.iter().map(|r| r.season.as_str())),
    ) {
        if row_season != season {
            return Err(Error::InvalidInput(format!(
                "season mismatch: expected {season}, found {row_season}"
            )));
        }
    }

    let payroll_by_team: BTreeMap<&str, f64> = payrolls
        .iter()
        .map(|p| (p.team.as_str(), p.payroll_usd))
        .collect();

    let mut salary_by_name: BTreeMap<String, &SalaryRow> = BTreeMap::new();
    for s in salaries {
        let key = normalize_name(&s.player_name);
        if salary_by_name.insert(key, s).is_some() {
            return Err(Error::DuplicateSalary {
                player: s.player_name.clone(),
            });
        }
    }

    let mut experience_by_name: BTreeMap<String, &ExperienceRow> = BTreeMap::new();
    for e in experience {
        let key = normalize_name(&e.player_name);
        if experience_by_name.insert(key, e).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate experience rows for player {}",
                e.player_name
            )));
        }
    }

    let mut stats_by_name: BTreeMap<String, Vec<&RawStatRow>> = BTreeMap::new();
    for row in stats {
        if row.team == "TOT" {
            log.tot_rows_discarded += 1;
            continue;
        }
        stats_by_name
            .entry(normalize_name(&row.player_name))
            .or_default()
            .push(row);
    }

    let mut records = Vec::new();
    for (key, salary) in &salary_by_name {
        let Some(candidates) = stats_by_name.get(key) else {
            log.dropped_missing_stats += 1;
            continue;
        };
        let Some(exp) = experience_by_name.get(key) else {
            log.dropped_missing_experience += 1;
            continue;
        };
        let stat_row = if candidates.len() == 1 {
            candidates[0]
        } else {
            match candidates.iter().find(|r| r.team == salary.team) {
                Some(row) => row,
                None => {
                    log.dropped_team_mismatch += 1;
                    continue;
                }
            }
        };
        if salary.salary_usd <= 0.0 {
            log.dropped_zero_salary += 1;
            continue;
        }
        let payroll =
            *payroll_by_team
                .get(salary.team.as_str())
                .ok_or_else(|| Error::MissingPayroll {
                    team: salary.team.clone(),
                })?;

        records.push(PlayerSeasonRecord {
            player_name: salary.player_name.clone(),
            normalized_name: key.clone(),
            season: season.to_string(),
            kind,
            team: salary.team.clone(),
            position: stat_row.position.clone(),
            age: stat_row.age,
            experience_years: exp.experience_years,
            games: stat_row.games,
            games_started: stat_row.games_started,
            minutes: stat_row.minutes,
            features: stat_row.features.clone(),
            salary_usd: salary.salary_usd,
            payroll_usd: payroll,
            salary_share: None,
            share_class: None,
        });
    }
    // BTreeMap iteration already sorts output by normalized name.
    log.merged = records.len();
    Ok((records, log))
}

/// Drop records with fewer than `min_games` appearances. Idempotent.
pub fn clean(records: Vec<PlayerSeasonRecord>, min_games: u32) -> Vec<PlayerSeasonRecord> {
    records
        .into_iter()
        .filter(|r| r.games >= min_games)
        .collect()
}

/// Populate salary shares, replacing a team's payroll by the sum of its
/// listed salaries whenever that sum is larger. Returns the corrections
/// applied.
pub fn compute_salary_shares(records: &mut [PlayerSeasonRecord]) -> Result<Vec<PayrollCorrection>> {
    let mut team_sum: BTreeMap<String, f64> = BTreeMap::new();
    let mut team_reported: BTreeMap<String, f64> = BTreeMap::new();
    for r in records.iter() {
        *team_sum.entry(r.team.clone()).or_insert(0.0) += r.salary_usd;
        team_reported.insert(r.team.clone(), r.payroll_usd);
    }

    let mut corrections = Vec::new();
    let mut effective: BTreeMap<String, f64> = BTreeMap::new();
    for (team, &sum) in &team_sum {
        let reported = team_reported[team];
        if reported <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "non-positive payroll for team {team}"
            )));
        }
        let eff = if sum > reported {
            corrections.push(PayrollCorrection {
                team: team.clone(),
                reported,
                effective: sum,
            });
            sum
        } else {
            reported
        };
        effective.insert(team.clone(), eff);
    }

    for r in records.iter_mut() {
        let eff = effective[&r.team];
        let share = r.salary_usd / eff;
        if !(share > 0.0 && share < 1.0) {
            return Err(Error::InvalidInput(format!(
                "salary share {share} for {} falls outside (0,1)",
                r.player_name
            )));
        }
        r.payroll_usd = eff;
        r.salary_share = Some(share);
    }
    Ok(corrections)
}

/// Low/high class of a share: high exactly when share >= threshold
/// (bands are left-closed).
pub fn label_share_class(share: f64, threshold: f64) -> Result<ShareClass> {
    if !(share > 0.0 && share < 1.0) {
        return Err(Error::InvalidInput(format!("share {share} outside (0,1)")));
    }
    Ok(if share < threshold {
        ShareClass::Low
    } else {
        ShareClass::High
    })
}

/// Attach share classes to every record (shares must be populated).
pub fn label_records(records: &mut [PlayerSeasonRecord], threshold: f64) -> Result<()> {
    for r in records.iter_mut() {
        let share = r.salary_share.ok_or_else(|| {
            Error::InvalidInput(format!("record {} has no salary share", r.player_name))
        })?;
        r.share_class = Some(label_share_class(share, threshold)?);
    }
    Ok(())
}

/// Share-band counts: [0,5%), [5,10%), [10,15%), [15,20%), [20,25%),
/// and 25% upward.
pub fn share_band_counts(shares: &[f64]) -> [usize; 6] {
    let mut bands = [0usize; 6];
    for &s in shares {
        let idx = ((s / 0.05) as usize).min(5);
        bands[idx] += 1;
    }
    bands
}

// ---------------------------------------------------------------------------
// Design matrix
// ---------------------------------------------------------------------------

/// Assemble the design matrix for fitted records of one kind.
///
/// Column order is fixed: EXP, AGE (optional), G, GS, MP, then the stat
/// features in table order. Null cells become NaN and are imputed to
/// the training-fold mean by the scaler.
pub fn build_design_matrix(
    records: &[PlayerSeasonRecord],
    kind: StatKind,
    task: Task,
    include_age: bool,
) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::InvalidInput(
            "zero usable rows for the design matrix".into(),
        ));
    }
    for r in records {
        if r.kind != kind {
            return Err(Error::InvalidInput(format!(
                "record {} carries {} statistics, expected {kind}",
                r.player_name, r.kind
            )));
        }
    }

    let mut feature_names: Vec<String> = vec!["EXP".into()];
    if include_age {
        feature_names.push("AGE".into());
    }
    feature_names.extend(["G".into(), "GS".into(), "MP".into()]);
    let stat_names: Vec<String> = records[0].features.keys().cloned().collect();
    feature_names.extend(stat_names.iter().cloned());

    let season = records[0].season.clone();
    let mut rows = Vec::with_capacity(records.len());
    let mut y = Vec::with_capacity(records.len());
    let nan = f64::NAN;
    for r in records {
        if r.season != season {
            return Err(Error::InvalidInput(format!(
                "records span seasons {season} and {}; refusing to pool",
                r.season
            )));
        }
        let mut row = Vec::with_capacity(feature_names.len());
        row.push(r.experience_years as f64);
        if include_age {
            row.push(r.age.map_or(nan, |a| a as f64));
        }
        row.push(r.games as f64);
        row.push(r.games_started.map_or(nan, |g| g as f64));
        row.push(r.minutes);
        for name in &stat_names {
            let cell = r.features.get(name).copied().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "record {} lacks feature column {name}",
                    r.player_name
                ))
            })?;
            row.push(cell.unwrap_or(nan));
        }
        rows.push(row);

        match task {
            Task::Regression => {
                let share = r.salary_share.ok_or_else(|| {
                    Error::InvalidInput(format!("record {} has no salary share", r.player_name))
                })?;
                y.push(share);
            }
            Task::Classification => {
                let class = r.share_class.ok_or_else(|| {
                    Error::InvalidInput(format!("record {} has no share class", r.player_name))
                })?;
                y.push(if class == ShareClass::High { 1.0 } else { 0.0 });
            }
        }
    }

    let dataset = Dataset {
        season,
        kind: kind.label().to_string(),
        feature_names,
        x: Matrix::from_rows(rows)?,
        y,
        task,
        scale: ResponseScale::Share,
    };
    dataset.validate()?;
    Ok(dataset)
}

// ---------------------------------------------------------------------------
// Whole-season convenience pipeline and CSV output
// ---------------------------------------------------------------------------

pub struct SeasonSources<R: Read> {
    pub stats: R,
    pub salaries: R,
    pub payrolls: R,
    pub experience: R,
}

/// Parse, merge, clean, and populate shares and classes for one season.
pub fn ingest_season<R: Read>(
    sources: SeasonSources<R>,
    kind: StatKind,
    season: &str,
    min_games: u32,
    class_threshold: f64,
) -> Result<(Vec<PlayerSeasonRecord>, CleanLog)> {
    let stats = parse_stats_csv(sources.stats, kind, season)?;
    let salaries = parse_salary_csv(sources.salaries, season)?;
    let payrolls = parse_payroll_csv(sources.payrolls, season)?;
    let experience = parse_experience_csv(sources.experience, season)?;
    let (merged, mut log) = merge_sources(&stats, &salaries, &payrolls, &experience, season, kind)?;
    let mut records = clean(merged, min_games);
    log.dropped_low_games = log.merged - records.len();
    log.payroll_corrections = compute_salary_shares(&mut records)?;
    label_records(&mut records, class_threshold)?;
    log.cleaned = records.len();
    Ok((records, log))
}

/// Write cleaned records as CSV. Column order: identity and response
/// fields first, then the statistics in table order.
pub fn write_records_csv<W: Write>(records: &[PlayerSeasonRecord], mut out: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Io {
        path: "<output>".into(),
        source: e,
    };
    let stat_names: Vec<String> = records
        .first()
        .map(|r| r.features.keys().cloned().collect())
        .unwrap_or_default();
    let mut header = vec![
        "player",
        "season",
        "team",
        "position",
        "age",
        "experience",
        "games",
        "games_started",
        "minutes",
        "salary_usd",
        "payroll_usd",
        "salary_share",
        "share_class",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    header.extend(stat_names.iter().cloned());
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;

    for r in records {
        let mut cells: Vec<String> = vec![
            r.player_name.clone(),
            r.season.clone(),
            r.team.clone(),
            r.position.clone(),
            r.age.map(|a| a.to_string()).unwrap_or_default(),
            r.experience_years.to_string(),
            r.games.to_string(),
            r.games_started.map(|g| g.to_string()).unwrap_or_default(),
            r.minutes.to_string(),
            r.salary_usd.to_string(),
            r.payroll_usd.to_string(),
            r.salary_share.map(|s| s.to_string()).unwrap_or_default(),
            match r.share_class {
                Some(ShareClass::High) => "high".into(),
                Some(ShareClass::Low) => "low".into(),
                None => String::new(),
            },
        ];
        for name in &stat_names {
            cells.push(
                r.features
                    .get(name)
                    .and_then(|v| v.map(|x| x.to_string()))
                    .unwrap_or_default(),
            );
        }
        writeln!(out, "{}", cells.join(",")).map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stat_rows(specs: &[(&str, &str, u32)]) -> Vec<RawStatRow> {
        specs
            .iter()
            .map(|(name, team, games)| RawStatRow {
                player_name: name.to_string(),
                season: "2016-2017".into(),
                team: team.to_string(),
                position: "PG".into(),
                age: Some(25),
                games: *games,
                games_started: Some(0),
                minutes: 20.0,
                features: IndexMap::from([("PTS".to_string(), Some(10.0))]),
            })
            .collect()
    }

    fn salary_rows(specs: &[(&str, &str, f64)]) -> Vec<SalaryRow> {
        specs
            .iter()
            .map(|(name, team, pay)| SalaryRow {
                player_name: name.to_string(),
                season: "2016-2017".into(),
                team: team.to_string(),
                salary_usd: *pay,
            })
            .collect()
    }

    fn payroll_rows(specs: &[(&str, f64)]) -> Vec<PayrollRow> {
        specs
            .iter()
            .map(|(team, pay)| PayrollRow {
                team: team.to_string(),
                season: "2016-2017".into(),
                payroll_usd: *pay,
            })
            .collect()
    }

    fn experience_rows(specs: &[(&str, u32)]) -> Vec<ExperienceRow> {
        specs
            .iter()
            .map(|(name, exp)| ExperienceRow {
                player_name: name.to_string(),
                season: "2016-2017".into(),
                experience_years: *exp,
            })
            .collect()
    }

    fn merge(
        stats: &[RawStatRow],
        salaries: &[SalaryRow],
        payrolls: &[PayrollRow],
        experience: &[ExperienceRow],
    ) -> Result<(Vec<PlayerSeasonRecord>, CleanLog)> {
        merge_sources(
            stats,
            salaries,
            payrolls,
            experience,
            "2016-2017",
            StatKind::PerGame,
        )
    }

    #[test]
    fn parses_minimal_header() {
        let csv = "Player,Tm,G,GS,MP,PTS\nA. Player,BOS,70,70,32.1,14.0\n";
        let rows = parse_stats_csv(csv.as_bytes(), StatKind::PerGame, "2016-2017").unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].games, 70);
        assert_eq!(rows[0].features["PTS"], Some(14.0));
        assert_eq!(rows[0].minutes, 32.1);
    }

    #[test]
    fn empty_cell_becomes_null() {
        let csv = "Player,Tm,G,GS,MP,3P%\nA. Player,BOS,70,70,32.1,\n";
        let rows = parse_stats_csv(csv.as_bytes(), StatKind::PerGame, "2016-2017").unwrap();
        assert_eq!(rows[0].features["3P%"], None);
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let csv = "Player,Tm,G,GS,MP,PTS\nA. Player,BOS,seventy,70,32.1,14.0\n";
        let err = parse_stats_csv(csv.as_bytes(), StatKind::PerGame, "2016-2017").unwrap_err();
        assert_eq!(err.to_string(), "non-numeric value in column G, line 2");
    }

    #[test]
    fn missing_mandatory_column_is_named() {
        let csv = "Player,G,GS,MP\nA,70,1,30\n";
        let err = parse_stats_csv(csv.as_bytes(), StatKind::PerGame, "2016-2017").unwrap_err();
        assert!(matches!(err, Error::MissingColumn { column } if column == "Tm"));
    }

    #[test]
    fn kind_exclusive_columns_enforced() {
        let csv = "Player,Tm,G,MP,eFG%\nA,BOS,70,30,0.5\n";
        assert!(parse_stats_csv(csv.as_bytes(), StatKind::Per36, "s").is_err());
        assert!(parse_stats_csv(csv.as_bytes(), StatKind::PerGame, "s").is_ok());
        let csv = "Player,Tm,G,MP,ORtg\nA,BOS,70,30,110\n";
        assert!(parse_stats_csv(csv.as_bytes(), StatKind::PerGame, "s").is_err());
        assert!(parse_stats_csv(csv.as_bytes(), StatKind::Per100, "s").is_ok());
    }

    #[test]
    fn shooting_percentages_validated() {
        let csv = "Player,Tm,G,MP,FG%\nA,BOS,70,30,47.5\n";
        let err = parse_stats_csv(csv.as_bytes(), StatKind::PerGame, "s").unwrap_err();
        assert!(err.to_string().contains("FG%"));
    }

    #[test]
    fn name_normalization_folds_diacritics() {
        assert_eq!(normalize_name("Nikola Jokić"), "nikola jokic");
        assert_eq!(normalize_name("  Tim  Duncan Jr. "), "tim duncan jr.");
        assert_eq!(normalize_name("Álex Abrines"), "alex abrines");
    }

    #[test]
    fn team_switch_keeps_the_paying_team_row() {
        let mut stats = stat_rows(&[
            ("Switcher", "CLE", 30),
            ("Switcher", "TOT", 60),
            ("Switcher", "BOS", 30),
        ]);
        stats[2].features["PTS"] = Some(22.0); // the BOS row is distinguishable
        let salaries = salary_rows(&[("Switcher", "BOS", 1e6)]);
        let payrolls = payroll_rows(&[("BOS", 1e8)]);
        let experience = experience_rows(&[("Switcher", 5)]);
        let (records, log) = merge(&stats, &salaries, &payrolls, &experience).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].team, "BOS");
        assert_eq!(records[0].features["PTS"], Some(22.0));
        assert_eq!(log.tot_rows_discarded, 1);
    }

    #[test]
    fn players_missing_from_any_source_are_dropped() {
        let stats = stat_rows(&[
            ("In All", "BOS", 50),
            ("Stats Only", "BOS", 50),
            ("No Exp", "BOS", 40),
        ]);
        let salaries = salary_rows(&[
            ("In All", "BOS", 1e6),
            ("No Stats", "BOS", 2e6),
            ("No Exp", "BOS", 3e6),
        ]);
        let payrolls = payroll_rows(&[("BOS", 1e8)]);
        let experience = experience_rows(&[("In All", 3), ("No Stats", 2)]);
        let (records, log) = merge(&stats, &salaries, &payrolls, &experience).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].player_name, "In All");
        assert_eq!(log.dropped_missing_stats, 1);
        assert_eq!(log.dropped_missing_experience, 1);
    }

    #[test]
    fn three_complete_players_merge() {
        let stats = stat_rows(&[
            ("A One", "BOS", 50),
            ("B Two", "LAL", 60),
            ("C Three", "MIA", 70),
        ]);
        let salaries = salary_rows(&[
            ("A One", "BOS", 1e6),
            ("B Two", "LAL", 2e6),
            ("C Three", "MIA", 3e6),
        ]);
        let payrolls = payroll_rows(&[("BOS", 1e8), ("LAL", 1e8), ("MIA", 1e8)]);
        let experience = experience_rows(&[("A One", 1), ("B Two", 2), ("C Three", 3)]);
        let (records, _) = merge(&stats, &salaries, &payrolls, &experience).unwrap();
        assert_eq!(records.len(), 3);
    }

    #[test]
    fn duplicate_salary_rows_error() {
        let stats = stat_rows(&[("Dup Name", "BOS", 50)]);
        let salaries = salary_rows(&[("Dup Name", "BOS", 1e6), ("Dup Name", "LAL", 2e6)]);
        let payrolls = payroll_rows(&[("BOS", 1e8), ("LAL", 1e8)]);
        let experience = experience_rows(&[("Dup Name", 3)]);
        let err = merge(&stats, &salaries, &payrolls, &experience).unwrap_err();
        assert!(matches!(err, Error::DuplicateSalary { .. }));
    }

    #[test]
    fn missing_payroll_names_team() {
        let stats = stat_rows(&[("A One", "BOS", 50)]);
        let salaries = salary_rows(&[("A One", "BOS", 1e6)]);
        let payrolls = payroll_rows(&[("LAL", 1e8)]);
        let experience = experience_rows(&[("A One", 1)]);
        let err = merge(&stats, &salaries, &payrolls, &experience).unwrap_err();
        assert!(matches!(err, Error::MissingPayroll { team } if team == "BOS"));
    }

    fn record(team: &str, games: u32, salary: f64, payroll: f64) -> PlayerSeasonRecord {
        PlayerSeasonRecord {
            player_name: format!("P {team} {games} {salary}"),
            normalized_name: format!("p {team} {games} {salary}"),
            season: "2016-2017".into(),
            kind: StatKind::PerGame,
            team: team.into(),
            position: "C".into(),
            age: Some(27),
            experience_years: 4,
            games,
            games_started: Some(10),
            minutes: 25.0,
            features: IndexMap::from([("PTS".to_string(), Some(12.0))]),
            salary_usd: salary,
            payroll_usd: payroll,
            salary_share: None,
            share_class: None,
        }
    }

    #[test]
    fn clean_uses_strictly_less_than() {
        let records = vec![
            record("BOS", 5, 1e6, 1e8),
            record("BOS", 10, 2e6, 1e8),
            record("BOS", 82, 3e6, 1e8),
        ];
        let cleaned = clean(records.clone(), DEFAULT_MIN_GAMES);
        let games: Vec<u32> = cleaned.iter().map(|r| r.games).collect();
        assert_eq!(games, vec![10, 82]);
        // min_games 0 is the identity
        assert_eq!(clean(records.clone(), 0).len(), 3);
        // idempotence
        let twice = clean(clean(records, DEFAULT_MIN_GAMES), DEFAULT_MIN_GAMES);
        let twice_games: Vec<u32> = twice.iter().map(|r| r.games).collect();
        assert_eq!(twice_games, games);
    }

    #[test]
    fn payroll_correction_branch() {
        let mut records = vec![
            record("BOS", 50, 60.0, 100.0),
            record("BOS", 60, 50.0, 100.0),
            record("BOS", 70, 40.0, 100.0),
        ];
        let corrections = compute_salary_shares(&mut records).unwrap();
        assert_eq!(corrections.len(), 1);
        assert_eq!(corrections[0].effective, 150.0);
        let shares: Vec<f64> = records.iter().map(|r| r.salary_share.unwrap()).collect();
        assert!((shares[0] - 0.4).abs() < 1e-12);
        assert!((shares[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((shares[2] - 40.0 / 150.0).abs() < 1e-12);
        let total: f64 = shares.iter().sum();
        assert!(total <= 1.0 + 1e-12);
    }

    #[test]
    fn no_correction_when_payroll_covers_salaries() {
        let mut records = vec![
            record("BOS", 50, 60.0, 200.0),
            record("BOS", 60, 50.0, 200.0),
            record("BOS", 70, 40.0, 200.0),
        ];
        let corrections = compute_salary_shares(&mut records).unwrap();
        assert!(corrections.is_empty());
        let shares: Vec<f64> = records.iter().map(|r| r.salary_share.unwrap()).collect();
        assert_eq!(shares, vec![0.30, 0.25, 0.20]);
    }

    #[test]
    fn top_share_reproduced() {
        let mut records = vec![
            record("HOU", 81, 29.18, 100.0),
            record("HOU", 70, 20.0, 100.0),
        ];
        compute_salary_shares(&mut records).unwrap();
        assert!((records[0].salary_share.unwrap() - 0.2918).abs() < 1e-12);
    }

    #[test]
    fn class_threshold_is_left_closed() {
        assert_eq!(label_share_class(0.0499, 0.05).unwrap(), ShareClass::Low);
        assert_eq!(label_share_class(0.05, 0.05).unwrap(), ShareClass::High);
        assert_eq!(label_share_class(0.2918, 0.05).unwrap(), ShareClass::High);
        assert!(label_share_class(0.0, 0.05).is_err());
        assert!(label_share_class(1.0, 0.05).is_err());
    }

    #[test]
    fn share_bands_match_left_closed_splits() {
        let bands = share_band_counts(&[0.01, 0.0499, 0.05, 0.12, 0.2918, 0.33]);
        assert_eq!(bands, [2, 1, 1, 0, 0, 2]);
    }

    #[test]
    fn design_matrix_columns_and_rows() {
        let mut records = vec![
            record("BOS", 50, 10.0, 100.0),
            record("BOS", 60, 20.0, 100.0),
        ];
        compute_salary_shares(&mut records).unwrap();
        label_records(&mut records, DEFAULT_CLASS_THRESHOLD).unwrap();

        let ds = build_design_matrix(&records, StatKind::PerGame, Task::Regression, true).unwrap();
        assert_eq!(ds.feature_names, vec!["EXP", "AGE", "G", "GS", "MP", "PTS"]);
        assert_eq!(ds.x.n_rows(), 2);
        assert_eq!(ds.y.len(), 2);
        assert!((ds.y[0] - 0.1).abs() < 1e-12);

        let no_age =
            build_design_matrix(&records, StatKind::PerGame, Task::Regression, false).unwrap();
        assert_eq!(no_age.feature_names, vec!["EXP", "G", "GS", "MP", "PTS"]);

        let single =
            build_design_matrix(&records[..1], StatKind::PerGame, Task::Regression, true).unwrap();
        assert_eq!(single.x.n_rows(), 1);

        assert!(build_design_matrix(&[], StatKind::PerGame, Task::Regression, true).is_err());
    }

    #[test]
    fn null_feature_cells_become_nan() {
        let mut records = vec![
            record("BOS", 50, 10.0, 100.0),
            record("BOS", 60, 20.0, 100.0),
        ];
        records[1].features.insert("PTS".to_string(), None);
        compute_salary_shares(&mut records).unwrap();
        let ds = build_design_matrix(&records, StatKind::PerGame, Task::Regression, false).unwrap();
        let pts_col = ds.feature_names.iter().position(|n| n == "PTS").unwrap();
        assert!(ds.x.get(1, pts_col).is_nan());
        assert!(!ds.x.get(0, pts_col).is_nan());
    }

    #[test]
    fn classification_design_matrix() {
        let mut records = vec![
            record("BOS", 50, 3.0, 100.0),
            record("BOS", 60, 20.0, 100.0),
        ];
        compute_salary_shares(&mut records).unwrap();
        label_records(&mut records, DEFAULT_CLASS_THRESHOLD).unwrap();
        let ds =
            build_design_matrix(&records, StatKind::PerGame, Task::Classification, true).unwrap();
        assert_eq!(ds.y, vec![0.0, 1.0]);
    }

    #[test]
    fn column_order_is_deterministic() {
        let csv = "Player,Tm,G,GS,MP,PTS,AST,TRB\nA,BOS,70,10,30,10,5,7\nB,BOS,60,20,28,12,4,6\n";
        let a = parse_stats_csv(csv.as_bytes(), StatKind::PerGame, "s").unwrap();
        let b = parse_stats_csv(csv.as_bytes(), StatKind::PerGame, "s").unwrap();
        let names_a: Vec<&String> = a[0].features.keys().collect();
        let names_b: Vec<&String> = b[0].features.keys().collect();
        assert_eq!(names_a, names_b);
        assert_eq!(names_a, vec!["PTS", "AST", "TRB"]);
    }

    #[test]
    fn records_csv_has_consistent_width() {
        let mut records = vec![
            record("BOS", 50, 10.0, 100.0),
            record("BOS", 60, 20.0, 100.0),
        ];
        compute_salary_shares(&mut records).unwrap();
        label_records(&mut records, DEFAULT_CLASS_THRESHOLD).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let width = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == width));
    }
}
