//! CSV and SVG output shared by the `bench` and `sushi` binaries.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use plotters::prelude::*;
use preftree::benchmarks::ExperimentReport;
use preftree::sushi::UserCurve;
use serde::{Deserialize, Serialize};

/// One row of a benchmark results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub run: usize,
    pub iteration: usize,
    pub regret: f64,
    pub cum_seconds: f64,
}

pub fn regret_rows(report: &ExperimentReport) -> Vec<RegretRow> {
    report
        .rows()
        .map(|(run, iteration, regret, cum_seconds)| RegretRow {
            run,
            iteration,
            regret,
            cum_seconds,
        })
        .collect()
}

pub fn write_regret_csv(path: &Path, rows: &[RegretRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_regret_csv(path: &Path) -> Result<Vec<RegretRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<RegretRow>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Regret,
    Seconds,
}

/// Per-iteration mean and standard deviation over runs.
pub fn mean_curve(rows: &[RegretRow], metric: Metric) -> Curve {
    let mut by_iter: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in rows {
        let v = match metric {
            Metric::Regret => row.regret,
            Metric::Seconds => row.cum_seconds,
        };
        by_iter.entry(row.iteration).or_default().push(v);
    }
    by_iter
        .into_iter()
        .map(|(i, vs)| {
            let n = vs.len() as f64;
            let mean = vs.iter().sum::<f64>() / n;
            let var = if vs.len() > 1 {
                vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (i, mean, var.sqrt())
        })
        .collect()
}

/// `(iteration, mean, std)` points of one curve.
pub type Curve = Vec<(usize, f64, f64)>;

/// Line chart of labelled mean curves with a ±1 std band.
pub fn plot_curves(path: &Path, title: &str, y_label: &str, series: &[(String, Curve)]) -> Result<()> {
    if series.iter().all(|(_, c)| c.is_empty()) {
        bail!("nothing to plot");
    }
    let x_max = series.iter().flat_map(|(_, c)| c.iter().map(|p| p.0)).max().unwrap_or(1).max(1);
    let y_hi = series
        .iter()
        .flat_map(|(_, c)| c.iter().map(|p| p.1 + p.2))
        .fold(f64::NEG_INFINITY, f64::max);
    let y_lo = series
        .iter()
        .flat_map(|(_, c)| c.iter().map(|p| (p.1 - p.2).max(0.0)))
        .fold(f64::INFINITY, f64::min);
    let pad = ((y_hi - y_lo) * 0.05).max(1e-9);

    let root = SVGBackend::new(path, (900, 560)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(64)
        .build_cartesian_2d(0usize..x_max, (y_lo - pad)..(y_hi + pad))?;
    chart
        .configure_mesh()
        .x_desc("iteration")
        .y_desc(y_label)
        .draw()?;
    for (k, (label, curve)) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart.draw_series(std::iter::once(Polygon::new(
            curve
                .iter()
                .map(|&(i, m, s)| (i, m + s))
                .chain(curve.iter().rev().map(|&(i, m, s)| (i, (m - s).max(0.0))))
                .collect::<Vec<_>>(),
            color.mix(0.15),
        )))?;
        chart
            .draw_series(LineSeries::new(curve.iter().map(|&(i, m, _)| (i, m)), color.stroke_width(2)))?
            .label(label.clone())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}

/// One row of a sushi results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SushiRow {
    pub mode: String,
    pub user: usize,
    pub query: usize,
    pub rho_regret: f64,
    pub kendall_tau: Option<f64>,
}

pub fn sushi_rows(mode: &str, curves: &[UserCurve]) -> Vec<SushiRow> {
    curves
        .iter()
        .flat_map(|c| {
            c.rho_regret.iter().zip(&c.kendall_tau).enumerate().map(move |(q, (&rho, &tau))| SushiRow {
                mode: mode.to_string(),
                user: c.user_id,
                query: q,
                rho_regret: rho,
                kendall_tau: tau,
            })
        })
        .collect()
}

pub fn write_sushi_csv(path: &Path, rows: &[SushiRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
