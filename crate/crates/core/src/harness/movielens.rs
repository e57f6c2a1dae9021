//! Movielens-1M style ingestion (`::`-separated `ratings.dat` and `users.dat`).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Group, InteractionDataset, ItemId, Provenance};
use crate::error::{Error, Result};
use crate::io::{parse_field, IdMap, LoadedDataset};

/// Minority share of the Age attribute the age threshold is tuned towards.
pub const AGE_TARGET_MINORITY: f64 = 0.236;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Gender,
    Age,
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attribute::Gender => "gender",
            Attribute::Age => "age",
        })
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gender" => Ok(Attribute::Gender),
            "age" => Ok(Attribute::Age),
            _ => Err(Error::Config(format!("unknown attribute `{s}` (gender|age)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub attribute: Attribute,
    /// Ratings below this were dropped; `None` keeps every rating.
    pub min_rating: Option<u32>,
    /// Age codes `>=` this form label 1.
    pub age_threshold: Option<u32>,
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    /// Users in `users.dat` left without any kept rating.
    pub dropped_users: usize,
    pub minority_ratio: f64,
}

fn split_line<'a, const N: usize>(path: &Path, line: usize, text: &'a str) -> Result<[&'a str; N]> {
    let fields: Vec<&str> = text.split("::").collect();
    fields.try_into().map_err(|f: Vec<&str>| Error::Parse {
        path: path.to_owned(),
        line,
        message: format!("expected {N} `::`-separated fields, found {}", f.len()),
    })
}

fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(String::from_utf8_lossy(&bytes)
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').to_owned()))
        .collect())
}

/// Picks the age boundary whose smaller side is closest to `target`.
pub fn age_threshold(ages: &[u32], target: f64) -> Option<u32> {
    let distinct: BTreeSet<u32> = ages.iter().copied().collect();
    let n = ages.len() as f64;
    distinct
        .iter()
        .skip(1)
        .map(|&t| {
            let share = ages.iter().filter(|&&a| a >= t).count() as f64 / n;
            ((share.min(1.0 - share) - target).abs(), t)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, t)| t)
}

/// Converts ratings to implicit interactions and binarizes the attribute:
/// gender `F` is label 1; for age, codes at or above the boundary closest to
/// a 23.6% minority are label 1. Labels are canonicalized afterwards.
pub fn ingest_movielens(
    ratings_path: &Path,
    users_path: &Path,
    attribute: Attribute,
    min_rating: Option<u32>,
) -> Result<(LoadedDataset, IngestReport)> {
    let mut raw_attr: HashMap<String, (String, usize)> = HashMap::new();
    for (line, text) in lines(users_path)? {
        let [user, gender, age, _occupation, _zip] = split_line::<5>(users_path, line, &text)?;
        let value = match attribute {
            Attribute::Gender => {
                if gender != "F" && gender != "M" {
                    return Err(Error::Parse {
                        path: users_path.to_owned(),
                        line,
                        message: format!("gender `{gender}` is neither F nor M"),
                    });
                }
                gender
            }
            Attribute::Age => {
                parse_field::<u32>(users_path, line, age)?;
                age
            }
        };
        if raw_attr.insert(user.to_owned(), (value.trim().to_owned(), line)).is_some() {
            return Err(Error::Parse {
                path: users_path.to_owned(),
                line,
                message: format!("duplicate user `{user}`"),
            });
        }
    }

    let mut kept = Vec::new();
    for (line, text) in lines(ratings_path)? {
        let [user, item, rating, _timestamp] = split_line::<4>(ratings_path, line, &text)?;
        let rating: u32 = parse_field(ratings_path, line, rating)?;
        if !raw_attr.contains_key(user) {
            return Err(Error::UnknownUser {
                id: user.to_owned(),
                path: ratings_path.to_owned(),
            });
        }
        if min_rating.is_none_or(|m| rating >= m) {
            kept.push((user.to_owned(), item.to_owned(), line));
        }
    }
    if kept.is_empty() {
        return Err(Error::NoInteractions);
    }

    let users = IdMap::from_ids(kept.iter().map(|r| r.0.as_str()));
    let items = IdMap::from_ids(kept.iter().map(|r| r.1.as_str()));
    let mut histories: Vec<Vec<ItemId>> = vec![Vec::new(); users.len()];
    for (user, item, line) in &kept {
        let list = &mut histories[users.get(user).expect("mapped")];
        let item = items.get(item).expect("mapped") as ItemId;
        if list.contains(&item) {
            return Err(Error::Parse {
                path: ratings_path.to_owned(),
                line: *line,
                message: format!("duplicate rating of item by user `{user}`"),
            });
        }
        list.push(item);
    }

    let values: Vec<&str> = (0..users.len()).map(|u| raw_attr[users.external(u)].0.as_str()).collect();
    let (labels, threshold): (Vec<u8>, Option<u32>) = match attribute {
        Attribute::Gender => (values.iter().map(|v| u8::from(*v == "F")).collect(), None),
        Attribute::Age => {
            let ages: Vec<u32> = values.iter().map(|v| v.parse().expect("checked")).collect();
            let t = age_threshold(&ages, AGE_TARGET_MINORITY).ok_or_else(|| {
                Error::InvalidArgument("all users share one age code; cannot binarize".into())
            })?;
            (ages.iter().map(|&a| u8::from(a >= t)).collect(), Some(t))
        }
    };
    let groups = labels.into_iter().map(|l| Group::from_label(l).expect("0 or 1")).collect();
    let dataset = InteractionDataset::new(items.len(), histories, groups, Provenance::Ingested)?;
    let report = IngestReport {
        attribute,
        min_rating,
        age_threshold: threshold,
        n_users: dataset.n_users(),
        n_items: dataset.n_items(),
        n_interactions: dataset.n_interactions(),
        dropped_users: raw_attr.len() - users.len(),
        minority_ratio: dataset.minority_ratio(),
    };
    Ok((LoadedDataset { dataset, users, items }, report))
}
