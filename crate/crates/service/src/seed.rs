//! Operator data loading: mentor lists and labeled venture logs.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context};
use hidss_core::matching::{ExpertiseTag, MentorProfile};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct MentorRow {
    #[serde(alias = "mentor_id")]
    id: String,
    tags: String,
    #[serde(default)]
    industries: String,
    #[serde(default, alias = "display_name")]
    name: String,
}

fn split_list(field: &str) -> impl Iterator<Item = &str> {
    field.split([';', '|']).map(str::trim).filter(|s| !s.is_empty())
}

/// Parses a delimited mentor list with a header row naming the columns
/// `id`, `tags` and `industries` (plus an optional `name`). Multiple tags or
/// industries in one cell are separated by `;`.
pub fn parse_mentors<R: std::io::Read>(reader: R) -> anyhow::Result<Vec<MentorProfile>> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut mentors = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in csv.deserialize::<MentorRow>().enumerate() {
        let line = i + 2;
        let row = row.with_context(|| format!("mentor list line {line}"))?;
        if !seen.insert(row.id.clone()) {
            bail!("mentor list line {line}: duplicate id `{}`", row.id);
        }
        let expertise = split_list(&row.tags)
            .map(|t| t.parse::<ExpertiseTag>())
            .collect::<Result<BTreeSet<_>, _>>()
            .with_context(|| format!("mentor list line {line}"))?;
        let profile = MentorProfile {
            mentor_id: row.id.into(),
            display_name: row.name,
            expertise,
            industries: split_list(&row.industries).map(str::to_owned).collect(),
        };
        profile.validate().with_context(|| format!("mentor list line {line}"))?;
        mentors.push(profile);
    }
    Ok(mentors)
}

pub fn read_mentors(path: &Path) -> anyhow::Result<Vec<MentorProfile>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_mentors(file)
}
