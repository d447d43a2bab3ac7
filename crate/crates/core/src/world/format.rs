//! Line-oriented dataset text.
//!
//! Choice datasets hold one record per line, `menu indices | chosen
//! indices`, whitespace separated. Act-value preference fixtures hold one
//! `winner loser` pair of act values per line. `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ActGrid, ChoiceDataset, ChoiceRecord, Preference, PreferenceDataset};
use crate::error::{Error, Result};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_indices(field: &str, line: usize) -> Result<Vec<usize>> {
    field
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::Parse { line, message: format!("expected a grid index, found {tok:?}") })
        })
        .collect()
}

pub fn parse_choice_dataset(text: &str) -> Result<ChoiceDataset> {
    let mut records = Vec::new();
    for (line, body) in content_lines(text) {
        let Some((menu, chosen)) = body.split_once('|') else {
            return Err(Error::Parse { line, message: "missing '|' separator".into() });
        };
        let menu = parse_indices(menu, line)?;
        let chosen = parse_indices(chosen, line)?;
        let record = ChoiceRecord::new(menu, chosen).map_err(|e| Error::Parse { line, message: e.to_string() })?;
        records.push(record);
    }
    Ok(ChoiceDataset { records })
}

pub fn format_choice_dataset(data: &ChoiceDataset) -> String {
    let mut out = String::from("# menu | chosen\n");
    for r in &data.records {
        let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{} | {}", join(&r.menu), join(&r.chosen));
    }
    out
}

pub fn read_choice_dataset(path: impl AsRef<Path>) -> Result<ChoiceDataset> {
    parse_choice_dataset(&fs::read_to_string(path)?)
}

pub fn write_choice_dataset(data: &ChoiceDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_choice_dataset(data))?;
    Ok(())
}

/// Parses `winner loser` act values, snapping each to the nearest grid
/// point.
pub fn parse_act_preferences(text: &str, grid: &ActGrid) -> Result<PreferenceDataset> {
    let mut pairs = Vec::new();
    for (line, body) in content_lines(text) {
        let vals = body
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { line, message: format!("expected an act value, found {t:?}") })
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected `winner loser`, found {} values", vals.len()),
            });
        }
        let pref = Preference::new(grid.nearest(vals[0]), grid.nearest(vals[1]))
            .map_err(|e| Error::Parse { line, message: e.to_string() })?;
        pairs.push(pref);
    }
    Ok(PreferenceDataset { pairs })
}

pub fn load_act_preferences(path: impl AsRef<Path>, grid: &ActGrid) -> Result<PreferenceDataset> {
    parse_act_preferences(&fs::read_to_string(path)?, grid)
}
