//! Synthetic stand-in for the sushi3 files.
//!
//! Items get features within the published ranges. Each user belongs to a
//! taste profile determined by their age band and current east/west region;
//! a profile is a linear utility over the item features plus a bonus per
//! minor group. A user ranks items by the profile utility plus independent
//! Gaussian noise. Rankings therefore agree within profiles, which is the
//! structure the user tree is meant to find.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::sampling::rng_for;
use crate::sushi::data::{SushiData, SushiItem, SushiUser, UserRanking, DATASET_A_ITEMS, MINOR_GROUPS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub items: usize,
    pub users: usize,
    /// Standard deviation of a user's individual deviation from their profile.
    pub individual_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            items: 100,
            users: 5000,
            individual_noise: 0.35,
            seed: 2003,
        }
    }
}

const PROFILES: usize = 4;

/// Taste profile of a user.
pub fn profile_of(user: &SushiUser) -> usize {
    usize::from(user.age_band >= 3) * 2 + user.east_west_now as usize
}

struct Profile {
    /// Weights on style, major group, oiliness/4, eat frequency/3, price.
    weights: [f64; 5],
    minor_bonus: [f64; 12],
}

impl Profile {
    fn utility(&self, item: &SushiItem) -> f64 {
        let x = [
            item.style as f64,
            item.major_group as f64,
            item.oiliness / 4.0,
            item.eat_frequency / 3.0,
            item.normalized_price,
        ];
        x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.minor_bonus[item.minor_group as usize]
    }
}

fn profiles<R: Rng>(rng: &mut R) -> Vec<Profile> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..PROFILES)
        .map(|_| Profile {
            weights: std::array::from_fn(|_| normal.sample(rng)),
            minor_bonus: std::array::from_fn(|_| normal.sample(rng)),
        })
        .collect()
}

fn items<R: Rng>(n: usize, rng: &mut R) -> Vec<SushiItem> {
    let mut items: Vec<SushiItem> = (0..n)
        .map(|id| SushiItem {
            id,
            name: format!("sushi{id}"),
            style: rng.random_range(0..=1),
            major_group: rng.random_range(0..=1),
            minor_group: rng.random_range(0..MINOR_GROUPS.len() as u8),
            oiliness: rng.random_range(0.0..=4.0),
            eat_frequency: rng.random_range(0.0..=3.0),
            normalized_price: rng.random_range(0.0..=1.0),
        })
        .collect();
    // stored prices span exactly [0, 1], as after loading
    let lo = items.iter().map(|i| i.normalized_price).fold(f64::INFINITY, f64::min);
    let hi = items.iter().map(|i| i.normalized_price).fold(f64::NEG_INFINITY, f64::max);
    for item in &mut items {
        item.normalized_price = if hi > lo {
            (item.normalized_price - lo) / (hi - lo)
        } else {
            0.0
        };
    }
    items
}

fn user<R: Rng>(id: usize, rng: &mut R) -> SushiUser {
    let prefecture_young: u8 = rng.random_range(0..48);
    let prefecture_now = if rng.random_bool(0.3) {
        rng.random_range(0..48)
    } else {
        prefecture_young
    };
    let region = |p: u8| p / 4;
    let east_west = |p: u8| u8::from(p >= 24);
    SushiUser {
        id,
        gender: rng.random_range(0..=1),
        age_band: rng.random_range(0..=5),
        survey_time: (rng.random_range(100.0..1400.0f64) * 1000.0).round() / 1000.0,
        prefecture_young,
        region_young: region(prefecture_young),
        east_west_young: east_west(prefecture_young),
        prefecture_now,
        region_now: region(prefecture_now),
        east_west_now: east_west(prefecture_now),
        prefecture_changed: u8::from(prefecture_now != prefecture_young),
    }
}

fn rank<R: Rng>(user_id: usize, chosen: &[usize], utility: impl Fn(usize) -> f64, noise: f64, rng: &mut R) -> UserRanking {
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("finite noise");
    let mut scored: Vec<(usize, f64)> = chosen.iter().map(|&id| (id, utility(id) + normal.sample(rng))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    UserRanking {
        user_id,
        items: scored.into_iter().map(|(id, _)| id).collect(),
    }
}

/// Generates a complete data set; deterministic in `cfg.seed`.
pub fn generate(cfg: &SyntheticConfig) -> SushiData {
    assert!(cfg.items > *DATASET_A_ITEMS.iter().max().expect("non-empty"), "too few items for set A");
    let mut rng = rng_for(cfg.seed, 0);
    let profiles = profiles(&mut rng);
    let items = items(cfg.items, &mut rng);
    let users: Vec<SushiUser> = (0..cfg.users).map(|id| user(id, &mut rng)).collect();
    let mut rankings_a = Vec::with_capacity(cfg.users);
    let mut rankings_b = Vec::with_capacity(cfg.users);
    let all: Vec<usize> = (0..cfg.items).collect();
    for u in &users {
        let profile = &profiles[profile_of(u)];
        let utility = |id: usize| profile.utility(&items[id]);
        rankings_a.push(rank(u.id, &DATASET_A_ITEMS, utility, cfg.individual_noise, &mut rng));
        let subset: Vec<usize> = all.choose_multiple(&mut rng, 10).copied().collect();
        rankings_b.push(rank(u.id, &subset, utility, cfg.individual_noise, &mut rng));
    }
    SushiData {
        items,
        users,
        rankings_a,
        rankings_b,
    }
}
