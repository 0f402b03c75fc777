//! Per-task curves with mean ± std bands across seeds, bar charts of
//! accumulated totals, and the aggregates behind both as CSV.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;

use super::run::load_metrics_csv;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Failures,
    TotalReward,
    SafeReward,
    UnsafeReward,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Failures, Metric::TotalReward, Metric::SafeReward, Metric::UnsafeReward];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Failures => "failures",
            Metric::TotalReward => "total_reward",
            Metric::SafeReward => "safe_reward",
            Metric::UnsafeReward => "unsafe_reward",
        }
    }

    fn of(self, r: &MetricsRecord) -> f64 {
        match self {
            Metric::Failures => r.failures as f64,
            Metric::TotalReward => r.total_reward,
            Metric::SafeReward => r.safe_reward,
            Metric::UnsafeReward => r.unsafe_reward,
        }
    }
}

/// One method or variant: a metrics stream per seed.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub seeds: Vec<Vec<MetricsRecord>>,
}

impl Series {
    /// Reads one metrics CSV per seed. A directory argument stands for every
    /// `seed-*/metrics.csv` below it, in name order.
    pub fn load(label: impl Into<String>, paths: &[PathBuf]) -> Result<Self> {
        let mut files = Vec::new();
        for p in paths {
            if p.is_dir() {
                let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                    .map_err(|e| Error::io(p, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|d| d.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("seed-")))
                    .map(|d| d.join("metrics.csv"))
                    .filter(|f| f.is_file())
                    .collect();
                found.sort_by_key(|f| seed_number(f));
                files.extend(found);
            } else {
                files.push(p.clone());
            }
        }
        let seeds = files.iter().map(load_metrics_csv).collect::<Result<_>>()?;
        Ok(Self {
            label: label.into(),
            seeds,
        })
    }
}

fn seed_number(metrics: &Path) -> (u64, PathBuf) {
    let dir = metrics.parent().unwrap_or(metrics);
    let n = dir
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_prefix("seed-"))
        .and_then(|n| n.parse().ok())
        .unwrap_or(u64::MAX);
    (n, dir.to_path_buf())
}

/// One plotted point. `block` is `None` for whole-run totals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub series: String,
    pub metric: String,
    pub block: Option<usize>,
    /// First task index of the block.
    pub first_task: Option<usize>,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn check(series: &[Series]) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Plot("no series to plot".into()));
    }
    for s in series {
        if s.seeds.is_empty() {
            return Err(Error::Plot(format!("series `{}` has an empty seed set", s.label)));
        }
    }
    Ok(())
}

/// Per-task totals of `metric` averaged over blocks of `block` consecutive
/// tasks within each seed, then mean ± std across seeds per block.
pub fn curve_aggregates(series: &[Series], metric: Metric, block: usize) -> Result<Vec<AggregateRow>> {
    check(series)?;
    if block == 0 {
        return Err(Error::Plot("block size must be >= 1".into()));
    }
    let mut rows = Vec::new();
    for s in series {
        // per seed: block index -> mean per-task total
        let per_seed: Vec<Vec<f64>> = s
            .seeds
            .iter()
            .map(|records| {
                let n_tasks = records.iter().map(|r| r.task + 1).max().unwrap_or(0);
                let mut totals = vec![0.0; n_tasks];
                for r in records {
                    totals[r.task] += metric.of(r);
                }
                totals.chunks(block).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
            })
            .collect();
        let n_blocks = per_seed.iter().map(Vec::len).min().unwrap_or(0);
        for b in 0..n_blocks {
            let xs: Vec<f64> = per_seed.iter().map(|v| v[b]).collect();
            let (mean, std) = mean_std(&xs);
            rows.push(AggregateRow {
                series: s.label.clone(),
                metric: metric.name().into(),
                block: Some(b),
                first_task: Some(b * block),
                mean,
                std,
                n_seeds: xs.len(),
            });
        }
    }
    Ok(rows)
}

/// Whole-run totals of `metric`, mean ± std across seeds.
pub fn total_aggregates(series: &[Series], metric: Metric) -> Result<Vec<AggregateRow>> {
    check(series)?;
    Ok(series
        .iter()
        .map(|s| {
            let xs: Vec<f64> = s.seeds.iter().map(|rs| rs.iter().map(|r| metric.of(r)).sum()).collect();
            let (mean, std) = mean_std(&xs);
            AggregateRow {
                series: s.label.clone(),
                metric: metric.name().into(),
                block: None,
                first_task: None,
                mean,
                std,
                n_seeds: xs.len(),
            }
        })
        .collect())
}

pub fn save_aggregates_csv(rows: &[AggregateRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn bounds(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Line chart of curve aggregates: one line and one ±std band per series.
pub fn line_chart(rows: &[AggregateRow], title: &str, block: usize, path: impl AsRef<Path>) -> Result<()> {
    let labels = series_order(rows);
    let lo = rows.iter().map(|r| r.mean - r.std).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.mean + r.std).fold(f64::NEG_INFINITY, f64::max);
    if rows.is_empty() {
        return Err(Error::Plot("nothing to draw".into()));
    }
    let (y0, y1) = bounds(lo, hi);
    let n_blocks = rows.iter().filter_map(|r| r.block).max().unwrap_or(0) + 1;
    let root = SVGBackend::new(path.as_ref(), (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..(n_blocks as f64 * block as f64).max(1.0), y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("task")
        .y_desc(rows[0].metric.as_str())
        .draw()
        .map_err(plot_err)?;
    for (k, label) in labels.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let pts: Vec<&AggregateRow> = rows.iter().filter(|r| &r.series == label).collect();
        // x at the middle of each block
        let x = |r: &AggregateRow| r.first_task.unwrap_or(0) as f64 + block as f64 / 2.0;
        let mut band: Vec<(f64, f64)> = pts.iter().map(|r| (x(r), r.mean + r.std)).collect();
        band.extend(pts.iter().rev().map(|r| (x(r), r.mean - r.std)));
        chart
            .draw_series(std::iter::once(Polygon::new(band, colour.mix(0.2).filled())))
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(pts.iter().map(|r| (x(r), r.mean)), colour.stroke_width(2)))
            .map_err(plot_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], colour.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Bar chart of total aggregates with ±std whiskers.
pub fn bar_chart(rows: &[AggregateRow], title: &str, path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Plot("nothing to draw".into()));
    }
    let hi = rows.iter().map(|r| r.mean + r.std).fold(0.0, f64::max);
    let lo = rows.iter().map(|r| r.mean - r.std).fold(0.0, f64::min);
    let (y0, y1) = bounds(lo, hi);
    let n = rows.len();
    let root = SVGBackend::new(path.as_ref(), (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0f64..n as f64, y0..y1)
        .map_err(plot_err)?;
    let names: Vec<String> = rows.iter().map(|r| r.series.clone()).collect();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(n.max(2))
        .x_label_formatter(&|x| {
            let i = x.floor() as usize;
            if (x - i as f64 - 0.5).abs() < 0.26 {
                names.get(i).cloned().unwrap_or_default()
            } else {
                String::new()
            }
        })
        .y_desc(rows[0].metric.as_str())
        .draw()
        .map_err(plot_err)?;
    for (i, r) in rows.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let x0 = i as f64 + 0.15;
        let x1 = i as f64 + 0.85;
        chart
            .draw_series(std::iter::once(Rectangle::new([(x0, 0.0), (x1, r.mean)], colour.filled())))
            .map_err(plot_err)?;
        let xm = i as f64 + 0.5;
        chart
            .draw_series(std::iter::once(PathElement::new(
                vec![(xm, r.mean - r.std), (xm, r.mean + r.std)],
                BLACK.stroke_width(2),
            )))
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}

fn series_order(rows: &[AggregateRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.series) {
            out.push(r.series.clone());
        }
    }
    out
}

/// Files written by [`plot_series`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlotOutputs {
    pub charts: Vec<PathBuf>,
    pub aggregates: PathBuf,
}

/// Every metric as a per-task curve and as a totals bar chart, plus
/// `aggregates.csv` holding all plotted numbers.
pub fn plot_series(series: &[Series], block: usize, out_dir: impl AsRef<Path>) -> Result<PlotOutputs> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut all = Vec::new();
    let mut charts = Vec::new();
    for metric in Metric::ALL {
        let curve = curve_aggregates(series, metric, block)?;
        let path = out_dir.join(format!("{}_per_task.svg", metric.name()));
        line_chart(&curve, &format!("{} per task (blocks of {block})", metric.name()), block, &path)?;
        charts.push(path);
        let totals = total_aggregates(series, metric)?;
        let path = out_dir.join(format!("{}_total.svg", metric.name()));
        bar_chart(&totals, &format!("accumulated {}", metric.name()), &path)?;
        charts.push(path);
        all.extend(curve);
        all.extend(totals);
    }
    let aggregates = out_dir.join("aggregates.csv");
    save_aggregates_csv(&all, &aggregates)?;
    Ok(PlotOutputs { charts, aggregates })
}
