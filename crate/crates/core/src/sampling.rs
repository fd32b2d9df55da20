//! Initial designs and uniform sampling over a [`FeatureSchema`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::schema::{CandidatePair, FeatureKind, FeatureSchema, Instance};

/// Deterministic RNG for a `(seed, stream)` combination. Streams keep the
/// draws of different loop steps independent of each other.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Latin-hypercube sample of `n` instances.
///
/// Every continuous dimension is cut into `n` equal-width bins and each bin
/// receives exactly one sample, at a uniform position inside the bin.
/// Categorical dimensions are drawn uniformly and independently.
pub fn latin_hypercube<R: Rng + ?Sized>(
    schema: &FeatureSchema,
    n: usize,
    rng: &mut R,
) -> Vec<Instance> {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(schema.len());
    for spec in schema.features() {
        let column = match &spec.kind {
            FeatureKind::Continuous { bounds: [lo, hi] } => {
                let mut bins: Vec<usize> = (0..n).collect();
                bins.shuffle(rng);
                let width = (hi - lo) / n as f64;
                bins.into_iter()
                    .map(|bin| {
                        let u: f64 = rng.random();
                        // stay inside the bin even when rounding pushes up
                        let x = lo + (bin as f64 + u) * width;
                        x.min(lo + (bin + 1) as f64 * width).min(*hi)
                    })
                    .collect()
            }
            FeatureKind::Categorical { labels } => (0..n)
                .map(|_| rng.random_range(0..labels.len()) as f64)
                .collect(),
        };
        columns.push(column);
    }
    (0..n)
        .map(|i| Instance::new(columns.iter().map(|c| c[i]).collect()))
        .collect()
}

/// `pair_count` candidate pairs built from a Latin-hypercube sample of
/// `2 * pair_count` instances, shuffled and paired consecutively.
pub fn lhs_sample_pairs(schema: &FeatureSchema, pair_count: usize, seed: u64) -> Vec<CandidatePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = latin_hypercube(schema, 2 * pair_count, &mut rng);
    points.shuffle(&mut rng);
    let mut it = points.into_iter();
    let mut pairs = Vec::with_capacity(pair_count);
    while let (Some(a), Some(b)) = (it.next(), it.next()) {
        pairs.push(CandidatePair::new(a, b));
    }
    pairs
}

/// One instance drawn uniformly from the schema.
pub fn uniform_instance<R: Rng + ?Sized>(schema: &FeatureSchema, rng: &mut R) -> Instance {
    Instance::new(
        schema
            .features()
            .iter()
            .map(|spec| match &spec.kind {
                FeatureKind::Continuous { bounds: [lo, hi] } => rng.random_range(*lo..=*hi),
                FeatureKind::Categorical { labels } => rng.random_range(0..labels.len()) as f64,
            })
            .collect(),
    )
}
