//! TSV dataset files.
//!
//! * `interactions.tsv`: `user_id<TAB>item_id`, one row per interaction
//! * `demographics.tsv`: `user_id<TAB>group_label`
//! * `recommendations.tsv`: `user_id<TAB>rank<TAB>item_id`, rank 1-based
//! * `user_idmap.tsv` / `item_idmap.tsv`: `external_id<TAB>dense_index`
//!
//! External ids are re-indexed densely. When every id of a kind parses as an
//! unsigned integer the dense order is numeric, otherwise lexicographic, so a
//! written dataset reads back with the same indices.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::data::{Group, InteractionDataset, ItemId, Provenance, RecommendationTable};
use crate::error::{Error, Result};

/// How raw demographic values become the binary group label.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelRule {
    /// Values are already `0` or `1`.
    Binary,
    /// Numeric values `>= threshold` map to label 1.
    AtLeast(f64),
    /// Values equal to the given string map to label 1.
    Equals(String),
}

impl LabelRule {
    fn apply(&self, raw: &str) -> Option<u8> {
        match self {
            LabelRule::Binary => match raw {
                "0" => Some(0),
                "1" => Some(1),
                _ => None,
            },
            LabelRule::AtLeast(t) => raw.parse::<f64>().ok().map(|v| u8::from(v >= *t)),
            LabelRule::Equals(s) => Some(u8::from(raw == s)),
        }
    }
}

/// Ordered mapping between external ids and dense indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    external: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    /// Dense order: numeric when all ids are unsigned integers, lexicographic otherwise.
    pub fn from_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> IdMap {
        let unique: HashSet<&str> = ids.into_iter().collect();
        let mut ids: Vec<&str> = unique.into_iter().collect();
        if ids.iter().all(|s| s.parse::<u64>().is_ok()) {
            ids.sort_by_key(|s| s.parse::<u64>().unwrap_or(u64::MAX));
        } else {
            ids.sort_unstable();
        }
        IdMap::from_ordered(ids.into_iter().map(str::to_owned).collect())
    }

    pub fn identity(n: usize) -> IdMap {
        IdMap::from_ordered((0..n).map(|i| i.to_string()).collect())
    }

    /// Keeps the given order. Ids must be unique.
    pub fn from_ordered(external: Vec<String>) -> IdMap {
        let index = external
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        IdMap { external, index }
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }

    pub fn get(&self, external: &str) -> Option<usize> {
        self.index.get(external).copied()
    }

    pub fn external(&self, dense: usize) -> &str {
        &self.external[dense]
    }

    pub fn read(path: &Path) -> Result<IdMap> {
        let mut rows = Vec::new();
        for (line, fields) in tsv_rows(path)? {
            let [ext, dense] = fields_n::<2>(path, line, &fields)?;
            let dense: usize = parse_field(path, line, dense)?;
            rows.push((dense, ext.to_owned(), line));
        }
        rows.sort_by_key(|r| r.0);
        for (expected, (dense, _, line)) in rows.iter().enumerate() {
            if *dense != expected {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: *line,
                    message: format!("dense indices must be 0..n, found {dense} at position {expected}"),
                });
            }
        }
        Ok(IdMap::from_ordered(rows.into_iter().map(|r| r.1).collect()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        for (dense, ext) in self.external.iter().enumerate() {
            writeln!(out, "{ext}\t{dense}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// File locations of one dataset on disk.
#[derive(Clone, Debug)]
pub struct DatasetFiles {
    pub interactions: PathBuf,
    pub demographics: PathBuf,
    /// Fixes the item index space (including items without interactions).
    pub item_map: Option<PathBuf>,
    pub user_map: Option<PathBuf>,
}

impl DatasetFiles {
    /// Conventional file names inside `dir`.
    pub fn in_dir(dir: &Path) -> DatasetFiles {
        DatasetFiles {
            interactions: dir.join("interactions.tsv"),
            demographics: dir.join("demographics.tsv"),
            item_map: Some(dir.join("item_idmap.tsv")),
            user_map: Some(dir.join("user_idmap.tsv")),
        }
    }

    /// Same as [`in_dir`](Self::in_dir) but drops id maps that do not exist.
    pub fn existing_in_dir(dir: &Path) -> DatasetFiles {
        let mut files = DatasetFiles::in_dir(dir);
        files.item_map = files.item_map.filter(|p| p.exists());
        files.user_map = files.user_map.filter(|p| p.exists());
        files
    }
}

/// A dataset together with the id maps used to build it.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dataset: InteractionDataset,
    pub users: IdMap,
    pub items: IdMap,
}

/// Reads `interactions.tsv` + `demographics.tsv` with 0/1 labels.
pub fn read_dataset(interactions: &Path, demographics: &Path) -> Result<InteractionDataset> {
    let files = DatasetFiles {
        interactions: interactions.to_owned(),
        demographics: demographics.to_owned(),
        item_map: None,
        user_map: None,
    };
    read_dataset_files(&files, &LabelRule::Binary).map(|l| l.dataset)
}

pub fn read_dataset_files(files: &DatasetFiles, rule: &LabelRule) -> Result<LoadedDataset> {
    let path = &files.interactions;
    let mut pairs = Vec::new();
    for (line, fields) in tsv_rows(path)? {
        let [user, item] = fields_n::<2>(path, line, &fields)?;
        pairs.push((user.to_owned(), item.to_owned(), line));
    }
    if pairs.is_empty() {
        return Err(Error::NoInteractions);
    }

    let items = match &files.item_map {
        Some(p) => IdMap::read(p)?,
        None => IdMap::from_ids(pairs.iter().map(|p| p.1.as_str())),
    };
    let users = match &files.user_map {
        Some(p) => IdMap::read(p)?,
        None => IdMap::from_ids(pairs.iter().map(|p| p.0.as_str())),
    };

    let mut histories = vec![Vec::new(); users.len()];
    let mut seen = HashSet::new();
    for (user, item, line) in &pairs {
        let u = users.get(user).ok_or_else(|| Error::Parse {
            path: path.clone(),
            line: *line,
            message: format!("user `{user}` missing from id map"),
        })?;
        let i = items.get(item).ok_or_else(|| Error::Parse {
            path: path.clone(),
            line: *line,
            message: format!("item `{item}` missing from id map"),
        })?;
        if !seen.insert((u, i)) {
            return Err(Error::Parse {
                path: path.clone(),
                line: *line,
                message: format!("duplicate interaction ({user}, {item})"),
            });
        }
        histories[u].push(i as ItemId);
    }

    let dpath = &files.demographics;
    let mut labels: Vec<Option<u8>> = vec![None; users.len()];
    for (line, fields) in tsv_rows(dpath)? {
        let [user, raw] = fields_n::<2>(dpath, line, &fields)?;
        let u = users.get(user).ok_or_else(|| Error::UnknownUser {
            id: user.to_owned(),
            path: dpath.clone(),
        })?;
        let label = rule.apply(raw).ok_or_else(|| Error::Parse {
            path: dpath.clone(),
            line,
            message: format!("cannot map `{raw}` to a group with rule {rule:?}"),
        })?;
        labels[u] = Some(label);
    }
    let groups = labels
        .iter()
        .enumerate()
        .map(|(u, l)| {
            l.and_then(Group::from_label).ok_or_else(|| Error::MissingLabel {
                id: users.external(u).to_owned(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let dataset = InteractionDataset::new(items.len(), histories, groups, Provenance::Ingested)?;
    Ok(LoadedDataset {
        dataset,
        users,
        items,
    })
}

/// Writes the dataset with dense ids plus identity id maps.
pub fn write_dataset(dataset: &InteractionDataset, files: &DatasetFiles) -> Result<()> {
    let path = &files.interactions;
    let mut out = create(path)?;
    for (user, items) in dataset.histories().iter().enumerate() {
        for item in items {
            writeln!(out, "{user}\t{item}").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;

    let path = &files.demographics;
    let mut out = create(path)?;
    for (user, group) in dataset.groups().iter().enumerate() {
        writeln!(out, "{user}\t{}", group.label()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;

    if let Some(p) = &files.item_map {
        IdMap::identity(dataset.n_items()).write(p)?;
    }
    if let Some(p) = &files.user_map {
        IdMap::identity(dataset.n_users()).write(p)?;
    }
    Ok(())
}

/// Writes the dataset under its external ids, with id maps that restore
/// the same dense indices on reading.
pub fn write_loaded_dataset(loaded: &LoadedDataset, files: &DatasetFiles) -> Result<()> {
    let LoadedDataset { dataset, users, items } = loaded;
    if users.len() != dataset.n_users() || items.len() != dataset.n_items() {
        return Err(Error::InvalidArgument(format!(
            "id maps cover {} users / {} items, dataset has {} / {}",
            users.len(),
            items.len(),
            dataset.n_users(),
            dataset.n_items()
        )));
    }
    let path = &files.interactions;
    let mut out = create(path)?;
    for (user, history) in dataset.histories().iter().enumerate() {
        for &item in history {
            writeln!(out, "{}\t{}", users.external(user), items.external(item as usize))
                .map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;

    let path = &files.demographics;
    let mut out = create(path)?;
    for (user, group) in dataset.groups().iter().enumerate() {
        writeln!(out, "{}\t{}", users.external(user), group.label()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;

    if let Some(p) = &files.item_map {
        items.write(p)?;
    }
    if let Some(p) = &files.user_map {
        users.write(p)?;
    }
    Ok(())
}

pub fn write_recommendations(table: &RecommendationTable, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for (user, list) in table.lists().iter().enumerate() {
        for (rank, item) in list.iter().enumerate() {
            writeln!(out, "{user}\t{}\t{item}", rank + 1).map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a recommendations file for `n_users` dense users.
pub fn read_recommendations(path: &Path, n_users: usize) -> Result<RecommendationTable> {
    let mut lists: BTreeMap<usize, BTreeMap<usize, ItemId>> = BTreeMap::new();
    for (line, fields) in tsv_rows(path)? {
        let [user, rank, item] = fields_n::<3>(path, line, &fields)?;
        let user: usize = parse_field(path, line, user)?;
        let rank: usize = parse_field(path, line, rank)?;
        let item: ItemId = parse_field(path, line, item)?;
        if user >= n_users || rank == 0 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("user {user} / rank {rank} out of range"),
            });
        }
        if lists.entry(user).or_default().insert(rank, item).is_some() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("duplicate rank {rank} for user {user}"),
            });
        }
    }
    let k = lists.values().next().map_or(0, BTreeMap::len);
    let mut out = Vec::with_capacity(n_users);
    for user in 0..n_users {
        let ranks = lists.remove(&user).ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: 0,
            message: format!("no recommendations for user {user}"),
        })?;
        if ranks.keys().copied().ne(1..=ranks.len()) {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: 0,
                message: format!("ranks for user {user} are not 1..n"),
            });
        }
        out.push(ranks.into_values().collect());
    }
    RecommendationTable::new(k, out)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Non-empty lines split on tabs, with 1-based line numbers.
pub(crate) fn tsv_rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').split('\t').map(str::to_owned).collect()))
        .collect())
}

pub(crate) fn fields_n<'a, const N: usize>(
    path: &Path,
    line: usize,
    fields: &'a [String],
) -> Result<[&'a str; N]> {
    if fields.len() != N {
        return Err(Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("expected {N} tab-separated fields, found {}", fields.len()),
        });
    }
    Ok(std::array::from_fn(|i| fields[i].as_str()))
}

pub(crate) fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_owned(),
        line,
        message: format!("cannot parse `{raw}`"),
    })
}
