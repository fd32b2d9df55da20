//! Sushi preference data: items, users and rankings.
//!
//! [`load_sushi_data`] reads the text files of the sushi3 distribution from
//! one directory. Fields are whitespace separated.
//!
//! `sushi3.idata`, one item per line:
//!
//! | column | field | range |
//! |---|---|---|
//! | 1 | item id | 0..99 |
//! | 2 | name | text |
//! | 3 | style (0 maki, 1 other) | {0, 1} |
//! | 4 | major group (0 seafood, 1 other) | {0, 1} |
//! | 5 | minor group | 0..11 |
//! | 6 | oiliness | [0, 4] |
//! | 7 | eating frequency | [0, 3] |
//! | 8 | price | ≥ 0, min-max rescaled to [0, 1] on load |
//! | 9 | selling frequency | ignored |
//!
//! `sushi3.udata`, one user per line:
//!
//! | column | field | range |
//! |---|---|---|
//! | 1 | user id | line order |
//! | 2 | gender | {0, 1} |
//! | 3 | age band | 0..5 |
//! | 4 | survey time in seconds | ≥ 0 |
//! | 5, 6, 7 | prefecture, region, east/west until age 15 | 0..47, 0..11, {0, 1} |
//! | 8, 9, 10 | prefecture, region, east/west now | 0..47, 0..11, {0, 1} |
//! | 11 | prefecture changed | {0, 1} |
//!
//! `sushi3a.5000.10.order` and `sushi3b.5000.10.order` start with a header
//! `<item count> 1`; line `u` after it is `0 10 i1 .. i10`, user `u`'s
//! ranking, most preferred first. Set A numbers its ten items 0..9 locally;
//! they are mapped to catalog ids through [`DATASET_A_ITEMS`].

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ComparisonPair, FeatureSchema, FeatureSpec, Instance};

pub const ITEM_FILE: &str = "sushi3.idata";
pub const USER_FILE: &str = "sushi3.udata";
pub const ORDER_A_FILE: &str = "sushi3a.5000.10.order";
pub const ORDER_B_FILE: &str = "sushi3b.5000.10.order";

/// Catalog ids of the ten items of set A, indexed by their local number.
pub const DATASET_A_ITEMS: [usize; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 26, 29];

pub const MINOR_GROUPS: [&str; 12] = [
    "aomono",
    "akami",
    "shiromi",
    "tare",
    "clam_or_shell",
    "squid_or_octopus",
    "shrimp_or_crab",
    "roe",
    "other_seafood",
    "egg",
    "meat",
    "vegetables",
];

pub const AGE_BANDS: [&str; 6] = ["15-19", "20-29", "30-39", "40-49", "50-59", "60+"];

const PREFECTURES: usize = 48;
const REGIONS: usize = 12;

#[derive(Debug, Error)]
pub enum SushiDataError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("unknown item id {0}")]
    UnknownItem(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SushiItem {
    pub id: usize,
    pub name: String,
    pub style: u8,
    pub major_group: u8,
    pub minor_group: u8,
    pub oiliness: f64,
    pub eat_frequency: f64,
    pub normalized_price: f64,
}

impl SushiItem {
    /// Feature vector under [`item_schema`].
    pub fn instance(&self) -> Instance {
        Instance::new(vec![
            self.style as f64,
            self.major_group as f64,
            self.minor_group as f64,
            self.oiliness,
            self.eat_frequency,
            self.normalized_price,
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SushiUser {
    pub id: usize,
    pub gender: u8,
    pub age_band: u8,
    pub survey_time: f64,
    pub prefecture_young: u8,
    pub region_young: u8,
    pub east_west_young: u8,
    pub prefecture_now: u8,
    pub region_now: u8,
    pub east_west_now: u8,
    pub prefecture_changed: u8,
}

impl SushiUser {
    /// Feature vector under [`user_schema`].
    pub fn features(&self) -> Instance {
        Instance::new(vec![
            self.gender as f64,
            self.age_band as f64,
            self.survey_time,
            self.prefecture_young as f64,
            self.region_young as f64,
            self.east_west_young as f64,
            self.prefecture_now as f64,
            self.region_now as f64,
            self.east_west_now as f64,
            self.prefecture_changed as f64,
        ])
    }
}

/// Ten catalog item ids, most preferred first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRanking {
    pub user_id: usize,
    pub items: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SushiData {
    pub items: Vec<SushiItem>,
    pub users: Vec<SushiUser>,
    pub rankings_a: Vec<UserRanking>,
    pub rankings_b: Vec<UserRanking>,
}

impl SushiData {
    pub fn item(&self, id: usize) -> Option<&SushiItem> {
        self.items.get(id)
    }

    /// Item feature vectors indexed by catalog id.
    pub fn item_instances(&self) -> Vec<Instance> {
        self.items.iter().map(SushiItem::instance).collect()
    }
}

pub fn item_schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        FeatureSpec::categorical("style", ["maki", "other"]),
        FeatureSpec::categorical("major_group", ["seafood", "other"]),
        FeatureSpec::categorical("minor_group", MINOR_GROUPS),
        FeatureSpec::continuous("oiliness", 0.0, 4.0),
        FeatureSpec::continuous("eat_frequency", 0.0, 3.0),
        FeatureSpec::continuous("price", 0.0, 1.0),
    ])
    .expect("static schema is valid")
}

pub fn user_schema() -> FeatureSchema {
    let numbered = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
    FeatureSchema::new(vec![
        FeatureSpec::categorical("gender", ["male", "female"]),
        FeatureSpec::categorical("age", AGE_BANDS),
        FeatureSpec::continuous("survey_time", 0.0, 1500.0),
        FeatureSpec::categorical("prefecture_young", numbered("pref", PREFECTURES)),
        FeatureSpec::categorical("region_young", numbered("region", REGIONS)),
        FeatureSpec::categorical("east_west_young", ["east", "west"]),
        FeatureSpec::categorical("prefecture_now", numbered("pref", PREFECTURES)),
        FeatureSpec::categorical("region_now", numbered("region", REGIONS)),
        FeatureSpec::categorical("east_west_now", ["east", "west"]),
        FeatureSpec::categorical("prefecture_changed", ["same", "moved"]),
    ])
    .expect("static schema is valid")
}

/// All pairs of a ranking as `(winner, loser)` item ids, ordered by rank
/// positions.
pub fn ranking_item_pairs(items: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(items.len() * items.len().saturating_sub(1) / 2);
    for (i, &w) in items.iter().enumerate() {
        for &l in &items[i + 1..] {
            out.push((w, l));
        }
    }
    out
}

/// All 45 comparisons implied by a ranking, as item feature vectors.
pub fn ranking_to_comparisons(
    ranking: &UserRanking,
    items: &[SushiItem],
) -> Result<Vec<ComparisonPair>, SushiDataError> {
    let lookup = |id: usize| {
        items
            .get(id)
            .map(SushiItem::instance)
            .ok_or(SushiDataError::UnknownItem(id))
    };
    ranking_item_pairs(&ranking.items)
        .into_iter()
        .map(|(w, l)| Ok(ComparisonPair::new(lookup(w)?, lookup(l)?)))
        .collect()
}

struct Line<'a> {
    file: &'a str,
    number: usize,
    fields: Vec<&'a str>,
}

impl Line<'_> {
    fn error(&self, message: impl Into<String>) -> SushiDataError {
        SushiDataError::Malformed {
            file: self.file.to_string(),
            line: self.number,
            message: message.into(),
        }
    }

    fn expect_len(&self, n: usize) -> Result<(), SushiDataError> {
        if self.fields.len() < n {
            Err(self.error(format!("expected {n} fields, found {}", self.fields.len())))
        } else {
            Ok(())
        }
    }

    fn int(&self, column: usize, name: &str, max: usize) -> Result<usize, SushiDataError> {
        let raw = self.fields[column];
        let v: usize = raw
            .parse()
            .map_err(|_| self.error(format!("{name}: '{raw}' is not a non-negative integer")))?;
        if v > max {
            return Err(self.error(format!("{name}: {v} outside 0..={max}")));
        }
        Ok(v)
    }

    fn small(&self, column: usize, name: &str, max: usize) -> Result<u8, SushiDataError> {
        Ok(self.int(column, name, max)? as u8)
    }

    fn real(&self, column: usize, name: &str, lower: f64, upper: f64) -> Result<f64, SushiDataError> {
        let raw = self.fields[column];
        let v: f64 = raw
            .parse()
            .map_err(|_| self.error(format!("{name}: '{raw}' is not a number")))?;
        if !v.is_finite() || v < lower || v > upper {
            return Err(self.error(format!("{name}: {v} outside [{lower}, {upper}]")));
        }
        Ok(v)
    }
}

fn lines<'a>(file: &'a str, text: &'a str) -> impl Iterator<Item = Line<'a>> {
    text.lines().enumerate().filter_map(move |(i, l)| {
        let fields: Vec<&str> = l.split_whitespace().collect();
        (!fields.is_empty()).then_some(Line {
            file,
            number: i + 1,
            fields,
        })
    })
}

pub fn parse_items(text: &str) -> Result<Vec<SushiItem>, SushiDataError> {
    let mut items = Vec::new();
    for line in lines(ITEM_FILE, text) {
        line.expect_len(8)?;
        let id = line.int(0, "item id", usize::MAX)?;
        if id != items.len() {
            return Err(line.error(format!("item id {id} out of sequence, expected {}", items.len())));
        }
        items.push(SushiItem {
            id,
            name: line.fields[1].to_string(),
            style: line.small(2, "style", 1)?,
            major_group: line.small(3, "major group", 1)?,
            minor_group: line.small(4, "minor group", MINOR_GROUPS.len() - 1)?,
            oiliness: line.real(5, "oiliness", 0.0, 4.0)?,
            eat_frequency: line.real(6, "eating frequency", 0.0, 3.0)?,
            normalized_price: line.real(7, "price", 0.0, f64::MAX)?,
        });
    }
    rescale_prices(&mut items);
    Ok(items)
}

/// Min-max rescales prices into [0, 1].
fn rescale_prices(items: &mut [SushiItem]) {
    let lo = items.iter().map(|i| i.normalized_price).fold(f64::INFINITY, f64::min);
    let hi = items.iter().map(|i| i.normalized_price).fold(f64::NEG_INFINITY, f64::max);
    for item in items.iter_mut() {
        item.normalized_price = if hi > lo {
            (item.normalized_price - lo) / (hi - lo)
        } else {
            0.0
        };
    }
}

pub fn parse_users(text: &str) -> Result<Vec<SushiUser>, SushiDataError> {
    let mut users = Vec::new();
    for line in lines(USER_FILE, text) {
        line.expect_len(11)?;
        let id = line.int(0, "user id", usize::MAX)?;
        if id != users.len() {
            return Err(line.error(format!("user id {id} out of sequence, expected {}", users.len())));
        }
        users.push(SushiUser {
            id,
            gender: line.small(1, "gender", 1)?,
            age_band: line.small(2, "age", AGE_BANDS.len() - 1)?,
            survey_time: line.real(3, "survey time", 0.0, f64::MAX)?,
            prefecture_young: line.small(4, "prefecture (young)", PREFECTURES - 1)?,
            region_young: line.small(5, "region (young)", REGIONS - 1)?,
            east_west_young: line.small(6, "east/west (young)", 1)?,
            prefecture_now: line.small(7, "prefecture (now)", PREFECTURES - 1)?,
            region_now: line.small(8, "region (now)", REGIONS - 1)?,
            east_west_now: line.small(9, "east/west (now)", 1)?,
            prefecture_changed: line.small(10, "prefecture changed", 1)?,
        });
    }
    Ok(users)
}

/// Parses an order file. `local_to_catalog` maps file-local item numbers to
/// catalog ids (identity when `None`).
pub fn parse_orders(
    file: &str,
    text: &str,
    local_to_catalog: Option<&[usize]>,
) -> Result<Vec<UserRanking>, SushiDataError> {
    let mut it = lines(file, text);
    let header = it.next().ok_or(SushiDataError::Malformed {
        file: file.to_string(),
        line: 1,
        message: "empty file".into(),
    })?;
    header.expect_len(1)?;
    let item_count = header.int(0, "item count", usize::MAX)?;
    if let Some(map) = local_to_catalog {
        if map.len() != item_count {
            return Err(header.error(format!(
                "header declares {item_count} items, expected {}",
                map.len()
            )));
        }
    }
    let mut rankings = Vec::new();
    for line in it {
        line.expect_len(2)?;
        let n = line.int(1, "ranking length", usize::MAX)?;
        if n != 10 {
            return Err(line.error(format!("ranking length {n}, expected 10")));
        }
        if line.fields.len() != 2 + n {
            return Err(line.error(format!(
                "expected {} item ids, found {}",
                n,
                line.fields.len() - 2
            )));
        }
        let mut items = Vec::with_capacity(n);
        let mut seen = HashSet::new();
        for column in 2..2 + n {
            let local = line.int(column, "item id", item_count.saturating_sub(1))?;
            if !seen.insert(local) {
                return Err(line.error(format!("item {local} ranked twice")));
            }
            items.push(local_to_catalog.map_or(local, |m| m[local]));
        }
        rankings.push(UserRanking {
            user_id: rankings.len(),
            items,
        });
    }
    Ok(rankings)
}

fn read(dir: &Path, name: &str) -> Result<String, SushiDataError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(SushiDataError::MissingFile(path));
    }
    fs::read_to_string(&path).map_err(|source| SushiDataError::Io { path, source })
}

/// Loads and validates the four sushi3 files in `dir`.
pub fn load_sushi_data(dir: impl AsRef<Path>) -> Result<SushiData, SushiDataError> {
    let dir = dir.as_ref();
    let items = parse_items(&read(dir, ITEM_FILE)?)?;
    let users = parse_users(&read(dir, USER_FILE)?)?;
    let rankings_a = parse_orders(ORDER_A_FILE, &read(dir, ORDER_A_FILE)?, Some(&DATASET_A_ITEMS))?;
    let rankings_b = parse_orders(ORDER_B_FILE, &read(dir, ORDER_B_FILE)?, None)?;
    for (file, rankings) in [(ORDER_A_FILE, &rankings_a), (ORDER_B_FILE, &rankings_b)] {
        if rankings.len() != users.len() {
            return Err(SushiDataError::Malformed {
                file: file.to_string(),
                line: 1,
                message: format!("{} rankings for {} users", rankings.len(), users.len()),
            });
        }
        if let Some(id) = rankings.iter().flat_map(|r| &r.items).find(|&&id| id >= items.len()) {
            return Err(SushiDataError::UnknownItem(*id));
        }
    }
    Ok(SushiData {
        items,
        users,
        rankings_a,
        rankings_b,
    })
}

/// Writes `data` in the layout [`load_sushi_data`] reads. Prices are written
/// as stored, so a round trip is exact when they span [0, 1].
pub fn write_sushi_data(dir: impl AsRef<Path>, data: &SushiData) -> Result<(), SushiDataError> {
    let dir = dir.as_ref();
    let io = |path: PathBuf| move |source| SushiDataError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;

    let mut text = String::new();
    for i in &data.items {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t0",
            i.id, i.name, i.style, i.major_group, i.minor_group, i.oiliness, i.eat_frequency, i.normalized_price
        );
    }
    fs::write(dir.join(ITEM_FILE), &text).map_err(io(dir.join(ITEM_FILE)))?;

    text.clear();
    for u in &data.users {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            u.id,
            u.gender,
            u.age_band,
            u.survey_time,
            u.prefecture_young,
            u.region_young,
            u.east_west_young,
            u.prefecture_now,
            u.region_now,
            u.east_west_now,
            u.prefecture_changed
        );
    }
    fs::write(dir.join(USER_FILE), &text).map_err(io(dir.join(USER_FILE)))?;

    let order_text = |rankings: &[UserRanking], count: usize, to_local: &dyn Fn(usize) -> usize| {
        let mut text = format!("{count} 1\n");
        for r in rankings {
            let ids: Vec<String> = r.items.iter().map(|&id| to_local(id).to_string()).collect();
            let _ = writeln!(text, "0 {} {}", r.items.len(), ids.join(" "));
        }
        text
    };
    let to_local_a = |id: usize| {
        DATASET_A_ITEMS
            .iter()
            .position(|&c| c == id)
            .expect("set A ranking uses set A items")
    };
    fs::write(dir.join(ORDER_A_FILE), order_text(&data.rankings_a, 10, &to_local_a))
        .map_err(io(dir.join(ORDER_A_FILE)))?;
    fs::write(
        dir.join(ORDER_B_FILE),
        order_text(&data.rankings_b, data.items.len(), &|id| id),
    )
    .map_err(io(dir.join(ORDER_B_FILE)))?;
    Ok(())
}
