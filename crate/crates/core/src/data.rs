//! Dataset generation, ingestion, splitting and the on-disk cache.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interactions::{Entry, InteractionStore};

/// Shape and sparsity constraints of a simulated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_users: usize,
    pub n_items: usize,
    pub density: f64,
    pub min_views_per_user: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 5000 users, 40 items, 80% sparse, at least 8 views per user.
    SimulatedPaper,
    /// 500 users, 40 items, 80% sparse, at least 8 views per user.
    SimulatedSmall,
    /// Shape of the production dataset: 6077 users, 1543 items, at least 20
    /// views per user.
    InHouseShape,
}

impl Preset {
    pub fn params(self) -> GeneratorParams {
        match self {
            Self::SimulatedPaper => GeneratorParams {
                n_users: 5000,
                n_items: 40,
                density: 0.2,
                min_views_per_user: 8,
            },
            Self::SimulatedSmall => GeneratorParams {
                n_users: 500,
                n_items: 40,
                density: 0.2,
                min_views_per_user: 8,
            },
            Self::InHouseShape => GeneratorParams {
                n_users: 6077,
                n_items: 1543,
                density: 0.02,
                min_views_per_user: 20,
            },
        }
    }
}

/// Binary interactions satisfying: every item seen at least once, every
/// user with at least `min_views_per_user` items, overall density within
/// one percentage point of `density`.
///
/// Items are first each given one uniformly random user, users are then
/// topped up with uniformly chosen unseen items, and finally uniform random
/// cells are switched on until the target count `round(density·N·M)`.
pub fn generate_simulated(params: &GeneratorParams, seed: u64) -> Result<InteractionStore> {
    let GeneratorParams {
        n_users,
        n_items,
        density,
        min_views_per_user,
    } = *params;
    if n_users == 0 || n_items == 0 {
        return Err(Error::Infeasible(format!(
            "shape {n_users}x{n_items} must be positive"
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Infeasible(format!(
            "density {density} outside (0, 1]"
        )));
    }
    if min_views_per_user > n_items || density * n_items as f64 + 1e-9 < min_views_per_user as f64 {
        return Err(Error::Infeasible(format!(
            "{min_views_per_user} views per user cannot fit {n_items} items at density {density}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = n_users * n_items;
    let mut on = vec![false; cells];
    let mut count = 0usize;

    for i in 0..n_items {
        let u = rng.random_range(0..n_users);
        if !on[u * n_items + i] {
            on[u * n_items + i] = true;
            count += 1;
        }
    }
    for u in 0..n_users {
        let row = &mut on[u * n_items..(u + 1) * n_items];
        let have = row.iter().filter(|&&b| b).count();
        if have >= min_views_per_user {
            continue;
        }
        let unseen: Vec<usize> = (0..n_items).filter(|&i| !row[i]).collect();
        for pick in index::sample(&mut rng, unseen.len(), min_views_per_user - have) {
            row[unseen[pick]] = true;
            count += 1;
        }
    }

    // integer counts whose density lands within ±0.01 of the request
    let lo = ((density - 0.01 - 1e-13) * cells as f64).ceil().max(0.0) as usize;
    let hi = ((density + 0.01 + 1e-13) * cells as f64).floor() as usize;
    if lo > hi {
        return Err(Error::Infeasible(format!(
            "no cell count on a {n_users}x{n_items} grid lands within 0.01 of density {density}"
        )));
    }
    let target = ((density * cells as f64).round() as usize).clamp(lo, hi);
    if count > hi {
        return Err(Error::Infeasible(format!(
            "coverage constraints alone reach density {:.4}, above target {density}",
            count as f64 / cells as f64
        )));
    }
    while count < target {
        let c = rng.random_range(0..cells);
        if !on[c] {
            on[c] = true;
            count += 1;
        }
    }

    let rows = (0..n_users)
        .map(|u| {
            (0..n_items)
                .filter(|&i| on[u * n_items + i])
                .map(|i| (i as u32, 1))
                .collect()
        })
        .collect();
    InteractionStore::from_rows(n_users, n_items, rows)
}

/// Observed properties of a dataset, for checking generator output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetCheck {
    pub min_user_views: usize,
    pub min_item_views: usize,
    pub density: f64,
}

impl DatasetCheck {
    pub fn of(store: &InteractionStore) -> Self {
        let mut item_views = vec![0usize; store.n_items()];
        for (_, i, _) in store.iter() {
            item_views[i as usize] += 1;
        }
        Self {
            min_user_views: (0..store.n_users())
                .map(|u| store.row_len(u))
                .min()
                .unwrap_or(0),
            min_item_views: item_views.into_iter().min().unwrap_or(0),
            density: store.density(),
        }
    }

    pub fn satisfies(&self, params: &GeneratorParams) -> bool {
        self.min_user_views >= params.min_views_per_user
            && self.min_item_views >= 1
            && (self.density - params.density).abs() <= 0.01 + 1e-12
    }
}

/// How raw MovieLens ids become matrix indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdMapping {
    /// `id − 1`; the index space spans `1..=max id`, so ids that never
    /// occur become empty rows or columns.
    #[default]
    Original,
    /// Distinct ids in ascending order map to `0, 1, 2, …`.
    Compact,
}

#[derive(Debug, Clone)]
pub struct MovieLensData {
    pub interactions: InteractionStore,
    /// Original id of each user index.
    pub user_ids: Vec<u64>,
    /// Original id of each item index.
    pub item_ids: Vec<u64>,
}

/// Loads a `UserID::MovieID::Rating::Timestamp` ratings file. Every rated
/// pair becomes an implicit interaction with count 1, whatever the rating.
pub fn load_movielens(path: impl AsRef<Path>, mapping: IdMapping) -> Result<MovieLensData> {
    let path = path.as_ref();
    let reader = BufReader::new(fs::File::open(path)?);
    let mut pairs: Vec<(u64, u64)> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split("::").collect();
        if fields.len() != 4 {
            return Err(parse_err(format!(
                "expected 4 '::'-separated fields, got {}",
                fields.len()
            )));
        }
        let id = |s: &str, what: &str| -> Result<u64> {
            match s.parse::<u64>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(parse_err(format!("invalid {what} id {s:?}"))),
            }
        };
        let user = id(fields[0], "user")?;
        let movie = id(fields[1], "movie")?;
        fields[2]
            .parse::<f64>()
            .map_err(|_| parse_err(format!("invalid rating {:?}", fields[2])))?;
        fields[3]
            .parse::<i64>()
            .map_err(|_| parse_err(format!("invalid timestamp {:?}", fields[3])))?;
        pairs.push((user, movie));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no ratings",
            path.display()
        )));
    }

    let index_of = |ids: Vec<u64>| -> (Vec<u64>, Box<dyn Fn(u64) -> usize>) {
        match mapping {
            IdMapping::Original => {
                let max = ids.into_iter().max().unwrap_or(0);
                ((1..=max).collect(), Box::new(|id| (id - 1) as usize))
            }
            IdMapping::Compact => {
                let mut ids = ids;
                ids.sort_unstable();
                ids.dedup();
                let lookup = ids.clone();
                (ids, Box::new(move |id| lookup.binary_search(&id).unwrap()))
            }
        }
    };
    let (user_ids, user_index) = index_of(pairs.iter().map(|p| p.0).collect());
    let (item_ids, item_index) = index_of(pairs.iter().map(|p| p.1).collect());

    let mut rows: Vec<Vec<Entry>> = vec![Vec::new(); user_ids.len()];
    for &(u, m) in &pairs {
        rows[user_index(u)].push((item_index(m) as u32, 1));
    }
    for row in &mut rows {
        row.sort_unstable();
        row.dedup_by_key(|e| e.0);
    }
    let interactions = InteractionStore::from_rows(user_ids.len(), item_ids.len(), rows)?;
    Ok(MovieLensData {
        interactions,
        user_ids,
        item_ids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// 60 / 20 / 20.
    pub fn new(seed: u64) -> Self {
        Self {
            train_frac: 0.6,
            valid_frac: 0.2,
            test_frac: 0.2,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.valid_frac, self.test_frac];
        if fr.iter().any(|&f| !(f > 0.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidHyperParams(format!(
                "split fractions must be positive and sum to 1, got {fr:?}"
            )));
        }
        Ok(())
    }

    /// `(train, valid, test)` sizes for a row of `n ≥ 3` items:
    /// `valid = ⌊valid_frac·n⌋`, `test = round(test_frac·n)`, each at least
    /// one, train takes the rest.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let nf = n as f64;
        let mut valid = ((self.valid_frac * nf) + 1e-9).floor().max(1.0) as usize;
        let mut test = (self.test_frac * nf).round().max(1.0) as usize;
        while valid + test >= n {
            if test > valid {
                test -= 1;
            } else {
                valid -= 1;
            }
        }
        (n - valid - test, valid, test)
    }
}

/// Train / validation / test stores over one `(N, M)` index space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub train: InteractionStore,
    pub valid: InteractionStore,
    pub test: InteractionStore,
    /// Users with fewer than 3 interactions, kept entirely in `train`.
    pub undersized_users: Vec<usize>,
}

/// Random per-user partition of every row.
pub fn split(interactions: &InteractionStore, spec: &SplitSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_users = interactions.n_users();
    let mut train = Vec::with_capacity(n_users);
    let mut valid = Vec::with_capacity(n_users);
    let mut test = Vec::with_capacity(n_users);
    let mut undersized_users = Vec::new();
    for u in 0..n_users {
        let mut row: Vec<Entry> = interactions.row(u).collect();
        if row.len() < 3 {
            if !row.is_empty() {
                log::warn!(
                    "user {u} has {} interactions; all kept for training",
                    row.len()
                );
            }
            undersized_users.push(u);
            train.push(row);
            valid.push(Vec::new());
            test.push(Vec::new());
            continue;
        }
        row.shuffle(&mut rng);
        let (n_train, n_valid, _) = spec.counts(row.len());
        let mut rest = row.split_off(n_train);
        let mut te = rest.split_off(n_valid);
        row.sort_unstable();
        rest.sort_unstable();
        te.sort_unstable();
        train.push(row);
        valid.push(rest);
        test.push(te);
    }
    let n_items = interactions.n_items();
    Ok(DatasetBundle {
        train: InteractionStore::from_rows(n_users, n_items, train)?,
        valid: InteractionStore::from_rows(n_users, n_items, valid)?,
        test: InteractionStore::from_rows(n_users, n_items, test)?,
        undersized_users,
    })
}

/// Header stored next to a cached dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub n_users: usize,
    pub n_items: usize,
    pub seed: Option<u64>,
    pub provenance: String,
}

pub const CACHE_CSV: &str = "interactions.csv";
pub const CACHE_HEADER: &str = "dataset.json";

/// Writes `interactions.csv` (`user_index,item_index,count`) and
/// `dataset.json` into `dir`.
pub fn write_cache(
    dir: impl AsRef<Path>,
    store: &InteractionStore,
    seed: Option<u64>,
    provenance: &str,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join(CACHE_CSV))?);
    writeln!(w, "user_index,item_index,count")?;
    for (u, i, c) in store.iter() {
        writeln!(w, "{u},{i},{c}")?;
    }
    w.flush()?;
    let header = CacheHeader {
        n_users: store.n_users(),
        n_items: store.n_items(),
        seed,
        provenance: provenance.to_string(),
    };
    let mut json = serde_json::to_string_pretty(&header)?;
    json.push('\n');
    fs::write(dir.join(CACHE_HEADER), json)?;
    Ok(())
}

pub fn read_cache(dir: impl AsRef<Path>) -> Result<(InteractionStore, CacheHeader)> {
    let dir = dir.as_ref();
    let header: CacheHeader = serde_json::from_slice(&fs::read(dir.join(CACHE_HEADER))?)?;
    let csv_path = dir.join(CACHE_CSV);
    let reader = BufReader::new(fs::File::open(&csv_path)?);
    let mut triplets = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if n == 0 || line.is_empty() {
            continue;
        }
        let parsed: Option<Vec<u32>> = line.split(',').map(|f| f.trim().parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[u, i, c]) => triplets.push((u, i, c)),
            _ => {
                return Err(Error::Parse {
                    path: csv_path,
                    line: n + 1,
                    message: format!("expected user_index,item_index,count, got {line:?}"),
                })
            }
        }
    }
    let store = InteractionStore::from_triplets(header.n_users, header.n_items, triplets)?;
    Ok((store, header))
}
