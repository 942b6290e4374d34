//! Interaction data: loading, id remapping, train/test splits and summary statistics.
//!
//! Two text formats are understood:
//!
//! * `adjacency-list`: one line per user, `user_id item_id item_id ...`, integer tokens
//!   (the layout of the public LightGCN `train.txt` / `test.txt` files);
//! * `pair-list`: one `user_id item_id` pair per line; tokens may be arbitrary strings.
//!
//! External ids are mapped to dense 0-based indices. Numeric ids keep their numeric
//! order, so files that are already dense load with the identity mapping.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `(user, item)` interaction over dense indices.
pub type Pair = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    AdjacencyList,
    PairList,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacency-list" | "adj" => Ok(Format::AdjacencyList),
            "pair-list" | "pairs" => Ok(Format::PairList),
            other => Err(Error::InvalidConfig(format!(
                "unknown dataset format {other:?} (expected adjacency-list or pair-list)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::AdjacencyList => "adjacency-list",
            Format::PairList => "pair-list",
        })
    }
}

/// Dense index -> external token.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdMap {
    external: Vec<String>,
}

impl IdMap {
    pub fn identity(n: usize) -> Self {
        IdMap {
            external: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let distinct: BTreeSet<&str> = tokens.into_iter().collect();
        let mut external: Vec<String> = distinct.into_iter().map(str::to_owned).collect();
        let numeric: Option<Vec<u64>> = external.iter().map(|t| t.parse().ok()).collect();
        if let Some(values) = numeric {
            let mut keyed: Vec<(u64, String)> = values.into_iter().zip(external).collect();
            keyed.sort();
            external = keyed.into_iter().map(|(_, t)| t).collect();
        }
        IdMap { external }
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.external
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }

    pub fn external(&self, index: usize) -> Option<&str> {
        self.external.get(index).map(String::as_str)
    }

    /// True when external id `k` maps to index `k` for every entry.
    pub fn is_identity(&self) -> bool {
        self.external
            .iter()
            .enumerate()
            .all(|(i, t)| t.parse::<usize>().ok() == Some(i))
    }

    /// Writes `internal<TAB>external` lines.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = create(path)?;
        for (i, t) in self.external.iter().enumerate() {
            writeln!(out, "{i}\t{t}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut external = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (idx, token) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.into(),
                line: n + 1,
                message: "expected `internal<TAB>external`".into(),
            })?;
            if idx.parse::<usize>().ok() != Some(external.len()) {
                return Err(Error::Parse {
                    path: path.into(),
                    line: n + 1,
                    message: format!("expected index {}, found {idx:?}", external.len()),
                });
            }
            external.push(token.to_owned());
        }
        Ok(IdMap { external })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionDataset {
    pub num_users: usize,
    pub num_items: usize,
    pub train: Vec<Pair>,
    pub test: Vec<Pair>,
    pub user_ids: IdMap,
    pub item_ids: IdMap,
    /// Repeated pairs dropped during ingestion (within a file, or test pairs already in train).
    pub duplicates_dropped: usize,
}

impl InteractionDataset {
    /// Builds a dataset over identity id maps, deduplicating both sides and removing
    /// test pairs that also occur in train.
    pub fn from_pairs(
        num_users: usize,
        num_items: usize,
        train: Vec<Pair>,
        test: Vec<Pair>,
    ) -> Result<Self> {
        let mut duplicates = 0;
        let train = dedup_pairs(train, &mut duplicates);
        let seen: HashSet<Pair> = train.iter().copied().collect();
        let test: Vec<Pair> = dedup_pairs(test, &mut duplicates)
            .into_iter()
            .filter(|p| {
                let fresh = !seen.contains(p);
                duplicates += usize::from(!fresh);
                fresh
            })
            .collect();
        for &(u, i) in train.iter().chain(&test) {
            check_range("user", u, num_users)?;
            check_range("item", i, num_items)?;
        }
        Ok(InteractionDataset {
            num_users,
            num_items,
            train,
            test,
            user_ids: IdMap::identity(num_users),
            item_ids: IdMap::identity(num_items),
            duplicates_dropped: duplicates,
        })
    }

    /// Loads a train file and an optional test file sharing one id space.
    pub fn load_split(train: &Path, test: Option<&Path>, format: Format) -> Result<Self> {
        let train_records = read_records(train, format)?;
        let test_records = match test {
            Some(p) => match read_records(p, format) {
                Err(Error::EmptyDataset(_)) => Vec::new(),
                other => other?,
            },
            None => Vec::new(),
        };
        let all = || train_records.iter().chain(&test_records);
        let user_ids = IdMap::from_tokens(all().map(|r| r.user.as_str()));
        let item_ids =
            IdMap::from_tokens(all().flat_map(|r| r.items.iter().map(String::as_str)));
        let (users, items) = (user_ids.index(), item_ids.index());
        let to_pairs = |records: &[Record]| -> Vec<Pair> {
            records
                .iter()
                .flat_map(|r| {
                    let u = users[r.user.as_str()];
                    r.items.iter().map(move |t| (u, t.as_str()))
                })
                .map(|(u, t)| (u, items[t]))
                .collect()
        };
        let mut ds = InteractionDataset::from_pairs(
            user_ids.len(),
            item_ids.len(),
            to_pairs(&train_records),
            to_pairs(&test_records),
        )?;
        if ds.duplicates_dropped > 0 {
            log::warn!(
                "{}: dropped {} duplicate interactions",
                train.display(),
                ds.duplicates_dropped
            );
        }
        ds.user_ids = user_ids;
        ds.item_ids = item_ids;
        Ok(ds)
    }

    /// Writes `train.txt`, `test.txt` (dense ids) and the two id maps into `dir`.
    pub fn save_dir(&self, dir: &Path, format: Format) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_interactions(&dir.join("train.txt"), self.num_users, &self.train, format)?;
        save_interactions(&dir.join("test.txt"), self.num_users, &self.test, format)?;
        self.user_ids.save(&dir.join("user_ids.tsv"))?;
        self.item_ids.save(&dir.join("item_ids.tsv"))
    }

    /// Loads `train.txt` and (if present) `test.txt` from a directory written by
    /// [`save_dir`](Self::save_dir) or laid out like the public LightGCN datasets.
    pub fn load_dir(dir: &Path, format: Format) -> Result<Self> {
        let test = dir.join("test.txt");
        let mut ds = Self::load_split(
            &dir.join("train.txt"),
            test.exists().then_some(test.as_path()),
            format,
        )?;
        for (file, map) in [("user_ids.tsv", &mut ds.user_ids), ("item_ids.tsv", &mut ds.item_ids)] {
            let path = dir.join(file);
            if path.exists() {
                let saved = IdMap::load(&path)?;
                if saved.len() == map.len() {
                    *map = saved;
                }
            }
        }
        Ok(ds)
    }

    /// Test items per user, sorted ascending.
    pub fn test_items_by_user(&self) -> Vec<Vec<usize>> {
        group_by_user(self.num_users, &self.test)
    }

    pub fn stats(&self) -> DatasetStats {
        compute_stats(self)
    }
}

/// Loads a single interaction file as the train side of a dataset with an empty test set.
pub fn load_interactions(path: &Path, format: Format) -> Result<InteractionDataset> {
    InteractionDataset::load_split(path, None, format)
}

/// Loads either a file or a directory holding `train.txt` / `test.txt`.
pub fn load_path(path: &Path, format: Format) -> Result<InteractionDataset> {
    if path.is_dir() {
        InteractionDataset::load_dir(path, format)
    } else {
        load_interactions(path, format)
    }
}

pub fn save_interactions(path: &Path, num_users: usize, pairs: &[Pair], format: Format) -> Result<()> {
    let mut out = create(path)?;
    let w = |out: &mut BufWriter<fs::File>, s: String| {
        out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
    };
    match format {
        Format::PairList => {
            for &(u, i) in pairs {
                w(&mut out, format!("{u} {i}\n"))?;
            }
        }
        Format::AdjacencyList => {
            for (u, items) in group_by_user(num_users, pairs).into_iter().enumerate() {
                let mut line = u.to_string();
                for i in items {
                    line.push(' ');
                    line.push_str(&i.to_string());
                }
                line.push('\n');
                w(&mut out, line)?;
            }
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Per-user random holdout: `floor(test_fraction * degree)` interactions of every user go
/// to test, the rest to train. Ids are taken as dense indices; counts are inferred from
/// the largest ids present.
pub fn holdout_split(pairs: &[Pair], test_fraction: f64, seed: u64) -> Result<InteractionDataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("holdout_split input".into()));
    }
    let num_users = pairs.iter().map(|p| p.0).max().unwrap_or(0) + 1;
    let num_items = pairs.iter().map(|p| p.1).max().unwrap_or(0) + 1;
    let mut dups = 0;
    let unique = dedup_pairs(pairs.to_vec(), &mut dups);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (u, mut items) in group_by_user(num_users, &unique).into_iter().enumerate() {
        items.shuffle(&mut rng);
        let n_test = (test_fraction * items.len() as f64).floor() as usize;
        test.extend(items[..n_test].iter().map(|&i| (u, i)));
        train.extend(items[n_test..].iter().map(|&i| (u, i)));
    }
    train.sort_unstable();
    test.sort_unstable();
    let mut ds = InteractionDataset::from_pairs(num_users, num_items, train, test)?;
    ds.duplicates_dropped = dups;
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_users: usize,
    pub num_items: usize,
    pub num_interactions: usize,
    pub density: f64,
}

impl DatasetStats {
    pub fn to_key_value(&self) -> String {
        format!(
            "users={}\nitems={}\ninteractions={}\ndensity={:.5}\n",
            self.num_users, self.num_items, self.num_interactions, self.density
        )
    }

    pub const CSV_HEADER: &'static str = "dataset,users,items,interactions,density";

    pub fn to_csv_row(&self, name: &str) -> String {
        format!(
            "{name},{},{},{},{:.5}",
            self.num_users, self.num_items, self.num_interactions, self.density
        )
    }
}

/// Counts over train and test together.
pub fn compute_stats(ds: &InteractionDataset) -> DatasetStats {
    let num_interactions = ds.train.len() + ds.test.len();
    let cells = ds.num_users as f64 * ds.num_items as f64;
    DatasetStats {
        num_users: ds.num_users,
        num_items: ds.num_items,
        num_interactions,
        density: if cells > 0.0 { num_interactions as f64 / cells } else { 0.0 },
    }
}

pub(crate) fn group_by_user(num_users: usize, pairs: &[Pair]) -> Vec<Vec<usize>> {
    let mut by_user = vec![Vec::new(); num_users];
    for &(u, i) in pairs {
        by_user[u].push(i);
    }
    for items in &mut by_user {
        items.sort_unstable();
    }
    by_user
}

fn dedup_pairs(pairs: Vec<Pair>, dropped: &mut usize) -> Vec<Pair> {
    let mut seen = HashSet::with_capacity(pairs.len());
    let before = pairs.len();
    let kept: Vec<Pair> = pairs.into_iter().filter(|p| seen.insert(*p)).collect();
    *dropped += before - kept.len();
    kept
}

fn check_range(kind: &'static str, id: usize, count: usize) -> Result<()> {
    if id < count {
        Ok(())
    } else {
        Err(Error::OutOfRange { kind, id, count })
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

struct Record {
    user: String,
    items: Vec<String>,
}

fn read_records(path: &Path, format: Format) -> Result<Vec<Record>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: PathBuf::from(path),
        line,
        message,
    };
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match format {
            Format::AdjacencyList => {
                if let Some(bad) = tokens.iter().find(|t| t.parse::<u64>().is_err()) {
                    return Err(parse_err(n + 1, format!("non-integer token {bad:?}")));
                }
                records.push(Record {
                    user: tokens[0].to_owned(),
                    items: tokens[1..].iter().map(|t| (*t).to_owned()).collect(),
                });
            }
            Format::PairList => {
                if tokens.len() != 2 {
                    return Err(parse_err(
                        n + 1,
                        format!("expected `user item`, found {} tokens", tokens.len()),
                    ));
                }
                records.push(Record {
                    user: tokens[0].to_owned(),
                    items: vec![tokens[1].to_owned()],
                });
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(path.display().to_string()));
    }
    Ok(records)
}
