//! Oracles written independently of the library code they check.
#![allow(dead_code)]

use preftree::posterior::LeafPair;
use preftree::schema::{ComparisonPair, FeatureKind, FeatureSchema};
use preftree::tree::SplitTest;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// ln Φ(z) straight from erfc: Φ(z) = erfc(−z/√2)/2, with the upper half
/// written as ln(1 − Φ(−z)) to keep precision near 1.
pub fn ln_phi(z: f64) -> f64 {
    if z > 0.0 {
        (-0.5 * libm::erfc(z / std::f64::consts::SQRT_2)).ln_1p()
    } else {
        (0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)).ln()
    }
}

/// The negative log posterior with a zero-mean isotropic prior, written out
/// term by term.
pub fn neg_log_posterior(f: &[f64], pairs: &[LeafPair], sigma_noise: f64, sigma_prior: f64) -> f64 {
    likelihood_term(f, pairs, sigma_noise) + f.iter().map(|x| x * x).sum::<f64>() / (2.0 * sigma_prior * sigma_prior)
}

pub fn likelihood_term(f: &[f64], pairs: &[LeafPair], sigma_noise: f64) -> f64 {
    let mut total = 0.0;
    for p in pairs {
        let z = (f[p.winner_leaf] - f[p.loser_leaf]) / (std::f64::consts::SQRT_2 * sigma_noise);
        total -= p.multiplicity as f64 * ln_phi(z);
    }
    total
}

/// Plain Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2)
/// until the vertex costs agree and the simplex has collapsed.
fn nelder_mead(cost: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, max_iters: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| cost(v)).collect();
    for _ in 0..max_iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= 1e-15 * values[0].abs().max(1.0) && size <= 1e-12 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect() };
        let reflected = along(-1.0);
        let fr = cost(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = cost(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] { along(-0.5) } else { along(0.5) };
            let fc = cost(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n).map(|k| 0.5 * (simplex[0][k] + simplex[i][k])).collect();
                    values[i] = cost(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("non-empty simplex");
    (simplex[best].clone(), values[best])
}

/// Minimizes the negative log posterior with Nelder-Mead, restarting from
/// the best vertex until a restart no longer improves the cost.
pub fn nelder_mead_map(m: usize, pairs: &[LeafPair], sigma_noise: f64, sigma_prior: f64) -> Vec<f64> {
    let cost = |f: &[f64]| neg_log_posterior(f, pairs, sigma_noise, sigma_prior);
    let mut best = vec![0.0; m];
    let mut best_cost = cost(&best);
    let mut step = sigma_prior;
    for _ in 0..40 {
        let (x, c) = nelder_mead(&cost, &best, step, 50_000);
        let improved = c < best_cost - 1e-14 * best_cost.abs().max(1.0);
        if c < best_cost {
            best = x;
            best_cost = c;
        }
        if !improved {
            break;
        }
        step = (step * 0.1).max(1e-7);
    }
    best
}

/// Thresholds and labels exactly as a person would list them: midpoints of
/// sorted distinct observed values, observed labels in ascending order.
pub fn brute_candidates(pairs: &[ComparisonPair], schema: &FeatureSchema) -> Vec<SplitTest> {
    let mut tests = Vec::new();
    for (feature, spec) in schema.features().iter().enumerate() {
        let mut seen: Vec<f64> = Vec::new();
        for p in pairs {
            for v in [p.winner.get(feature), p.loser.get(feature)] {
                if !seen.contains(&v) {
                    seen.push(v);
                }
            }
        }
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        match spec.kind {
            FeatureKind::Continuous { .. } => {
                for w in seen.windows(2) {
                    tests.push(SplitTest::Threshold {
                        feature,
                        threshold: (w[0] + w[1]) / 2.0,
                    });
                }
            }
            FeatureKind::Categorical { .. } => {
                for label in seen {
                    tests.push(SplitTest::CategoryEquals {
                        feature,
                        label: label as usize,
                    });
                }
            }
        }
    }
    tests
}

/// |n_right − n_left| by direct counting.
pub fn brute_score(pairs: &[ComparisonPair], test: &SplitTest) -> usize {
    let goes_right = |x: &preftree::Instance| match *test {
        SplitTest::Threshold { feature, threshold } => x.get(feature) >= threshold,
        SplitTest::CategoryEquals { feature, label } => x.get(feature) as usize == label,
    };
    let mut n_right = 0i64;
    let mut n_left = 0i64;
    for p in pairs {
        let w = goes_right(&p.winner);
        let l = goes_right(&p.loser);
        if w && !l {
            n_right += 1;
        }
        if l && !w {
            n_left += 1;
        }
    }
    (n_right - n_left).unsigned_abs() as usize
}

/// The first candidate with the maximal score, if it reaches `min_score`.
/// The candidate list is already in tie-break order.
pub fn brute_best(pairs: &[ComparisonPair], schema: &FeatureSchema, min_score: usize) -> Option<(SplitTest, usize)> {
    let mut best: Option<(SplitTest, usize)> = None;
    for test in brute_candidates(pairs, schema) {
        let s = brute_score(pairs, &test);
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((test, s));
        }
    }
    best.filter(|(_, s)| *s >= min_score)
}

/// Monte Carlo estimate of E[max(Y_a, Y_b)] and its standard error.
pub fn mc_expected_max<R: Rng>(
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    // Cholesky of the 2x2 covariance
    let l11 = cov[0][0].sqrt();
    let l21 = if l11 > 0.0 { cov[1][0] / l11 } else { 0.0 };
    let l22 = (cov[1][1] - l21 * l21).max(0.0).sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let u: f64 = StandardNormal.sample(rng);
        let v: f64 = StandardNormal.sample(rng);
        let a = mean[0] + l11 * u;
        let b = mean[1] + l21 * u + l22 * v;
        let y = a.max(b);
        sum += y;
        sum_sq += y * y;
    }
    let n = samples as f64;
    let mean_y = sum / n;
    let var = (sum_sq / n - mean_y * mean_y) * n / (n - 1.0);
    (mean_y, (var / n).sqrt())
}

/// Relative error with a floor of one on the scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
