//! Negated benchmark functions and the regret/timing experiment.
//!
//! Every function is the standard minimization form multiplied by −1, so the
//! optimizer maximizes. The known maximum value is the function evaluated at
//! its known maximizer, which keeps regret non-negative up to rounding.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::Strategy;
use crate::exec::Execution;
use crate::optimize::{run_with, Choice, Oracle, OracleError, RunConfig, RunFailure};
use crate::schema::{FeatureSchema, Instance};

/// Default suite, ordered by increasing spikiness.
pub const SUITE: [&str; 8] = [
    "branin",
    "dejong2d",
    "levy2d",
    "rosenbrock4d",
    "michalewicz2d",
    "hartmann6d",
    "michalewicz5d",
    "schwefel5d",
];

const SCHWEFEL_CONSTANT: f64 = 418.9829;
const SCHWEFEL_ARGMAX: f64 = 420.968_746_359_982_05;

const MICHALEWICZ_2D_ARGMAX: [f64; 2] = [2.202_905_515_975_667, 1.570_796_324_383_594];
const MICHALEWICZ_5D_ARGMAX: [f64; 5] = [
    2.202_905_509_897_293,
    1.570_796_323_608_805_2,
    1.284_991_566_418_318_3,
    1.923_058_465_589_417_8,
    1.720_469_767_982_553_1,
];
const HARTMANN_6D_ARGMAX: [f64; 6] = [
    0.201_689_509_234_095_84,
    0.150_010_688_764_179_22,
    0.476_873_972_432_962_2,
    0.275_332_428_312_954,
    0.311_651_611_575_136_7,
    0.657_300_529_380_464_1,
];

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

#[derive(Debug, Error, PartialEq)]
pub enum BenchmarkError {
    #[error("unknown benchmark function '{0}'")]
    Unknown(String),
    #[error("{name} expects {expected} coordinates, got {actual}")]
    Dimension {
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error("{name}: coordinate {index} = {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Branin,
    Sphere,
    Levy,
    Rosenbrock,
    Michalewicz,
    Hartmann6,
    Schwefel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkFunction {
    name: String,
    kind: Kind,
    bounds: Vec<(f64, f64)>,
    known_max_value: f64,
    known_max_location: Option<Instance>,
}

impl BenchmarkFunction {
    fn build(name: String, kind: Kind, bounds: Vec<(f64, f64)>, argmax: Vec<f64>) -> Self {
        let mut f = Self {
            name,
            kind,
            bounds,
            known_max_value: 0.0,
            known_max_location: Some(Instance::new(argmax)),
        };
        f.known_max_value = f.value(f.known_max_location.as_ref().expect("set above"));
        f
    }

    pub fn branin() -> Self {
        Self::build(
            "branin".into(),
            Kind::Branin,
            vec![(-5.0, 10.0), (0.0, 15.0)],
            vec![PI, 2.275],
        )
    }

    /// First De Jong function (sphere) on `[-5.12, 5.12]^d`.
    pub fn sphere(d: usize) -> Self {
        Self::build(format!("dejong{d}d"), Kind::Sphere, vec![(-5.12, 5.12); d], vec![0.0; d])
    }

    pub fn levy(d: usize) -> Self {
        Self::build(format!("levy{d}d"), Kind::Levy, vec![(-10.0, 10.0); d], vec![1.0; d])
    }

    pub fn rosenbrock(d: usize) -> Self {
        Self::build(
            format!("rosenbrock{d}d"),
            Kind::Rosenbrock,
            vec![(-5.0, 10.0); d],
            vec![1.0; d],
        )
    }

    /// Michalewicz with steepness 10; maximizers are known for d = 2 and 5.
    pub fn michalewicz(d: usize) -> Option<Self> {
        let argmax = match d {
            2 => MICHALEWICZ_2D_ARGMAX.to_vec(),
            5 => MICHALEWICZ_5D_ARGMAX.to_vec(),
            _ => return None,
        };
        Some(Self::build(
            format!("michalewicz{d}d"),
            Kind::Michalewicz,
            vec![(0.0, PI); d],
            argmax,
        ))
    }

    pub fn hartmann6() -> Self {
        Self::build(
            "hartmann6d".into(),
            Kind::Hartmann6,
            vec![(0.0, 1.0); 6],
            HARTMANN_6D_ARGMAX.to_vec(),
        )
    }

    pub fn schwefel(d: usize) -> Self {
        Self::build(
            format!("schwefel{d}d"),
            Kind::Schwefel,
            vec![(-500.0, 500.0); d],
            vec![SCHWEFEL_ARGMAX; d],
        )
    }

    /// Looks a function up by name, e.g. `branin`, `levy2d`, `schwefel5d`.
    pub fn by_name(name: &str) -> Result<Self, BenchmarkError> {
        let lower = name.to_ascii_lowercase();
        let unknown = || BenchmarkError::Unknown(name.to_string());
        let split = lower
            .find(|c: char| c.is_ascii_digit())
            .unwrap_or(lower.len());
        let (base, rest) = lower.split_at(split);
        let dim = if rest.is_empty() {
            None
        } else {
            Some(
                rest.strip_suffix('d')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&d| d >= 1)
                    .ok_or_else(unknown)?,
            )
        };
        match (base, dim) {
            ("branin", None | Some(2)) => Ok(Self::branin()),
            ("dejong" | "sphere", d) => Ok(Self::sphere(d.unwrap_or(2))),
            ("levy", d) => Ok(Self::levy(d.unwrap_or(2))),
            ("rosenbrock", d) if d != Some(1) => Ok(Self::rosenbrock(d.unwrap_or(4))),
            ("michalewicz", d) => Self::michalewicz(d.unwrap_or(2)).ok_or_else(unknown),
            ("hartmann", None | Some(6)) => Ok(Self::hartmann6()),
            ("schwefel", d) => Ok(Self::schwefel(d.unwrap_or(5))),
            _ => Err(unknown()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn known_max_value(&self) -> f64 {
        self.known_max_value
    }

    pub fn known_max_location(&self) -> Option<&Instance> {
        self.known_max_location.as_ref()
    }

    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema::continuous_box(&self.bounds).expect("benchmark bounds are valid")
    }

    /// Negated function value after checking dimension and bounds.
    pub fn evaluate(&self, x: &Instance) -> Result<f64, BenchmarkError> {
        if x.len() != self.dimension() {
            return Err(BenchmarkError::Dimension {
                name: self.name.clone(),
                expected: self.dimension(),
                actual: x.len(),
            });
        }
        for (index, (&value, &(lower, upper))) in x.values().iter().zip(&self.bounds).enumerate() {
            if !(lower..=upper).contains(&value) {
                return Err(BenchmarkError::OutOfBounds {
                    name: self.name.clone(),
                    index,
                    value,
                    lower,
                    upper,
                });
            }
        }
        Ok(self.value(x))
    }

    /// Negated function value without validation.
    pub fn value(&self, x: &Instance) -> f64 {
        let x = x.values();
        -match self.kind {
            Kind::Branin => branin(x),
            Kind::Sphere => x.iter().map(|v| v * v).sum(),
            Kind::Levy => levy(x),
            Kind::Rosenbrock => rosenbrock(x),
            Kind::Michalewicz => michalewicz(x),
            Kind::Hartmann6 => hartmann6(x),
            Kind::Schwefel => schwefel(x),
        }
    }

    pub fn regret(&self, x: &Instance) -> f64 {
        self.known_max_value - self.value(x)
    }
}

fn branin(x: &[f64]) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x[1] - b * x[0] * x[0] + c * x[0] - 6.0).powi(2) + 10.0 * (1.0 - t) * x[0].cos() + 10.0
}

fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let middle: f64 = w[..d - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let last = w[d - 1];
    let tail = (last - 1.0).powi(2) * (1.0 + (2.0 * PI * last).sin().powi(2));
    head + middle + tail
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

fn michalewicz(x: &[f64]) -> f64 {
    -x.iter()
        .enumerate()
        .map(|(i, &v)| v.sin() * ((i + 1) as f64 * v * v / PI).sin().powi(20))
        .sum::<f64>()
}

fn hartmann6(x: &[f64]) -> f64 {
    -HARTMANN_ALPHA
        .iter()
        .zip(HARTMANN_A.iter().zip(&HARTMANN_P))
        .map(|(alpha, (a, p))| {
            let inner: f64 = (0..6).map(|j| a[j] * (x[j] - p[j]).powi(2)).sum();
            alpha * (-inner).exp()
        })
        .sum::<f64>()
}

fn schwefel(x: &[f64]) -> f64 {
    SCHWEFEL_CONSTANT * x.len() as f64 - x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
}

/// Noiseless oracle answering by a benchmark function.
#[derive(Debug, Clone)]
pub struct BenchmarkOracle {
    pub function: BenchmarkFunction,
}

impl Oracle for BenchmarkOracle {
    fn answer(&mut self, a: &Instance, b: &Instance) -> Result<Choice, OracleError> {
        Ok(if self.function.value(a) >= self.function.value(b) {
            Choice::A
        } else {
            Choice::B
        })
    }

    fn true_utility(&self, x: &Instance) -> Option<f64> {
        Some(self.function.value(x))
    }

    fn optimum(&self) -> Option<f64> {
        Some(self.function.known_max_value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub function: String,
    pub strategy: Strategy,
    pub runs: usize,
    /// Regret after each answered query, one curve per run.
    pub regret: Vec<Vec<f64>>,
    /// Cumulative query-production seconds, one curve per run.
    pub cumulative_seconds: Vec<Vec<f64>>,
}

impl ExperimentReport {
    pub fn curve_len(&self) -> usize {
        self.regret.first().map_or(0, Vec::len)
    }

    pub fn mean_regret(&self) -> Vec<f64> {
        column_stats(&self.regret).0
    }

    pub fn std_regret(&self) -> Vec<f64> {
        column_stats(&self.regret).1
    }

    pub fn mean_seconds(&self) -> Vec<f64> {
        column_stats(&self.cumulative_seconds).0
    }

    pub fn std_seconds(&self) -> Vec<f64> {
        column_stats(&self.cumulative_seconds).1
    }

    pub fn final_regrets(&self) -> Vec<f64> {
        self.regret.iter().filter_map(|c| c.last().copied()).collect()
    }

    /// `(run, iteration, regret, cumulative seconds)` rows in run-major order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        self.regret
            .iter()
            .zip(&self.cumulative_seconds)
            .enumerate()
            .flat_map(|(run, (regret, seconds))| {
                regret
                    .iter()
                    .zip(seconds)
                    .enumerate()
                    .map(move |(i, (&r, &s))| (run, i, r, s))
            })
    }
}

/// Column-wise mean and sample standard deviation of equal-length curves.
fn column_stats(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = curves.len() as f64;
    let len = curves.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..len)
        .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / n)
        .collect();
    let std = (0..len)
        .map(|i| {
            if curves.len() < 2 {
                return 0.0;
            }
            let ss: f64 = curves.iter().map(|c| (c[i] - mean[i]).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        })
        .collect();
    (mean, std)
}

/// `runs` independent runs with seeds `cfg.seed + 0 .. cfg.seed + runs - 1`.
pub fn run_benchmark_experiment(
    function: &BenchmarkFunction,
    runs: usize,
    cfg: &RunConfig,
    strategy: Strategy,
) -> Result<ExperimentReport, RunFailure> {
    run_benchmark_experiment_with(function, runs, cfg, strategy, Execution::default())
}

/// As [`run_benchmark_experiment`]; `exec` schedules the runs and each run's
/// inner work. Timing curves are only comparable across sequential runs.
pub fn run_benchmark_experiment_with(
    function: &BenchmarkFunction,
    runs: usize,
    cfg: &RunConfig,
    strategy: Strategy,
    exec: Execution,
) -> Result<ExperimentReport, RunFailure> {
    assert!(runs >= 1, "at least one run is required");
    let schema = function.schema();
    let traces = exec.map(runs, |run| {
        let run_cfg = RunConfig {
            strategy,
            ..cfg.with_seed(cfg.seed.wrapping_add(run as u64))
        };
        let mut oracle = BenchmarkOracle {
            function: function.clone(),
        };
        run_with(&mut oracle, &schema, &run_cfg, exec)
    });
    let mut regret = Vec::with_capacity(runs);
    let mut cumulative_seconds = Vec::with_capacity(runs);
    for trace in traces {
        let trace = trace?;
        regret.push(trace.regrets());
        cumulative_seconds.push(trace.cumulative_seconds());
    }
    Ok(ExperimentReport {
        function: function.name().to_string(),
        strategy,
        runs,
        regret,
        cumulative_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branin_at_a_known_optimum() {
        let f = BenchmarkFunction::branin();
        let v = f.evaluate(&Instance::new(vec![PI, 2.275])).unwrap();
        assert!((v + 0.397_887_357_729_738_16).abs() < 1e-12);
        for x in [[-PI, 12.275], [9.424_78, 2.475]] {
            assert!((f.value(&Instance::new(x.to_vec())) - v).abs() < 1e-5);
        }
    }

    #[test]
    fn schwefel_optimum_is_near_zero() {
        let f = BenchmarkFunction::schwefel(2);
        let v = f.evaluate(&Instance::new(vec![420.9687, 420.9687])).unwrap();
        assert!(v.abs() < 1e-3);
        assert!(f.known_max_value().abs() < 1e-4);
    }

    #[test]
    fn hartmann_at_published_optimum() {
        let f = BenchmarkFunction::hartmann6();
        let published = Instance::new(vec![0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]);
        assert!((f.value(&published) - 3.32237).abs() < 1e-5);
        assert!((f.known_max_value() - 3.322_368_011_415_512_5).abs() < 1e-10);
    }

    #[test]
    fn michalewicz_best_known_values() {
        let m2 = BenchmarkFunction::michalewicz(2).unwrap();
        assert!((m2.known_max_value() - 1.8013).abs() < 1e-4);
        let m5 = BenchmarkFunction::michalewicz(5).unwrap();
        assert!((m5.known_max_value() - 4.687_658).abs() < 1e-6);
        assert!(BenchmarkFunction::michalewicz(3).is_none());
    }

    #[test]
    fn zero_minimum_functions() {
        for name in ["dejong2d", "levy2d", "rosenbrock4d"] {
            let f = BenchmarkFunction::by_name(name).unwrap();
            assert!(f.known_max_value().abs() < 1e-15, "{name}");
        }
    }

    #[test]
    fn suite_names_resolve_with_expected_dimensions() {
        let dims: Vec<usize> = SUITE
            .iter()
            .map(|n| BenchmarkFunction::by_name(n).unwrap().dimension())
            .collect();
        assert_eq!(dims, [2, 2, 2, 4, 2, 6, 5, 5]);
        assert_eq!(BenchmarkFunction::by_name("Schwefel2D").unwrap().dimension(), 2);
        assert!(BenchmarkFunction::by_name("ackley").is_err());
        assert!(BenchmarkFunction::by_name("levy0d").is_err());
    }

    #[test]
    fn evaluate_rejects_bad_input() {
        let f = BenchmarkFunction::branin();
        assert!(matches!(
            f.evaluate(&Instance::new(vec![0.0])),
            Err(BenchmarkError::Dimension { expected: 2, actual: 1, .. })
        ));
        assert!(matches!(
            f.evaluate(&Instance::new(vec![11.0, 0.0])),
            Err(BenchmarkError::OutOfBounds { index: 0, .. })
        ));
    }

    #[test]
    fn no_iterations_gives_initial_length_curves() {
        let cfg = RunConfig {
            initial_pairs: 6,
            iterations: 0,
            ..RunConfig::default()
        };
        let report =
            run_benchmark_experiment(&BenchmarkFunction::branin(), 1, &cfg, Strategy::Qeubo).unwrap();
        assert_eq!(report.regret.len(), 1);
        assert_eq!(report.curve_len(), 6);
        assert_eq!(report.rows().count(), 6);
    }

    #[test]
    fn regret_curves_are_reproducible() {
        let cfg = RunConfig {
            initial_pairs: 5,
            iterations: 5,
            ..RunConfig::default()
        };
        let f = BenchmarkFunction::levy(2);
        let a = run_benchmark_experiment(&f, 3, &cfg, Strategy::Qeubo).unwrap();
        let b = run_benchmark_experiment(&f, 3, &cfg, Strategy::Qeubo).unwrap();
        assert_eq!(a.regret, b.regret);
        assert!(a.regret.iter().flatten().all(|&r| r >= -1e-9));
        for curve in &a.cumulative_seconds {
            assert!(curve.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
