//! Report generation: turns a results CSV into grouped summary tables and
//! standalone SVG charts (no display dependencies; each chart embeds its
//! data table in an SVG `<metadata>` block).
//!
//! Aggregation ladder: duplicate rows (same dataset/method/task/seed/
//! hyperparameters, possible after an interrupted-and-resumed sweep) are
//! collapsed by max; "best performing" per (dataset, method, task) takes the
//! max over the hyperparameter grid within each seed, then the median across
//! seeds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::sweep::{read_results, ResultRow, SweepError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("results file is empty")]
    EmptyResults,
    #[error("results file is missing required data: {0}")]
    MissingColumns(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<SweepError> for ReportError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Csv(inner) => ReportError::MissingColumns(inner.to_string()),
            SweepError::Io(inner) => ReportError::Io(inner),
            other => ReportError::MissingColumns(other.to_string()),
        }
    }
}

/// One row of the best-performance table.
#[derive(Debug, Clone, PartialEq)]
pub struct BestRow {
    pub dataset: String,
    pub family: String,
    pub method: String,
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub seeds: usize,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub tables: Vec<PathBuf>,
    pub charts: Vec<PathBuf>,
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn family_of(generator_params: &str) -> String {
    // generator params are JSON like {"family":"ba",...} or {"path":...}
    serde_json::from_str::<serde_json::Value>(generator_params)
        .ok()
        .and_then(|v| v.get("family").and_then(|f| f.as_str()).map(String::from))
        .unwrap_or_else(|| "file".to_string())
}

/// Collapse duplicate rows by max, then compute best-per-grid within seed
/// and the median across seeds.
pub fn best_table(rows: &[ResultRow]) -> Vec<BestRow> {
    // (dataset, method, task, seed, hyperparams) → max value (dedupe)
    let mut dedup: HashMap<(String, String, String, u64, String), (f64, String, String)> =
        HashMap::new();
    for r in rows {
        let key = (
            r.dataset.clone(),
            r.method.clone(),
            r.task.clone(),
            r.seed,
            r.hyperparam_json.clone(),
        );
        dedup
            .entry(key)
            .and_modify(|(v, _, _)| *v = v.max(r.value))
            .or_insert((r.value, r.metric.clone(), r.generator_params.clone()));
    }
    // (dataset, method, task, seed) → max over grid
    let mut per_seed: BTreeMap<(String, String, String), BTreeMap<u64, f64>> = BTreeMap::new();
    let mut meta: HashMap<(String, String, String), (String, String, BTreeSet<String>)> =
        HashMap::new();
    for ((dataset, method, task, seed, hyper), (value, metric, gen)) in dedup {
        let key = (dataset, method, task);
        let entry = per_seed.entry(key.clone()).or_default();
        let v = entry.entry(seed).or_insert(f64::NEG_INFINITY);
        *v = v.max(value);
        let m = meta
            .entry(key)
            .or_insert_with(|| (metric.clone(), family_of(&gen), BTreeSet::new()));
        m.2.insert(hyper);
    }
    let mut out = Vec::new();
    for ((dataset, method, task), seed_values) in per_seed {
        let (metric, family, grid) = &meta[&(dataset.clone(), method.clone(), task.clone())];
        let mut values: Vec<f64> = seed_values.values().copied().collect();
        out.push(BestRow {
            dataset,
            family: family.clone(),
            method,
            task,
            metric: metric.clone(),
            value: median(&mut values),
            seeds: seed_values.len(),
            grid_points: grid.len(),
        });
    }
    out
}

/// Mean performance for each value of each hyperparameter, per
/// (family, method, task): the sensitivity view.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub family: String,
    pub method: String,
    pub hyperparam: String,
    pub value: f64,
    pub task: String,
    pub metric: String,
    pub mean: f64,
    pub n: usize,
}

pub fn sensitivity_table(rows: &[ResultRow]) -> Vec<SensitivityRow> {
    let mut acc: BTreeMap<(String, String, String, String, String, String), (f64, usize)> =
        BTreeMap::new();
    for r in rows {
        let family = family_of(&r.generator_params);
        let parsed: serde_json::Value = match serde_json::from_str(&r.hyperparam_json) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let Some(object) = parsed.as_object() else {
            continue;
        };
        for (key, value) in object {
            let Some(num) = value.as_f64() else { continue };
            let entry = acc
                .entry((
                    family.clone(),
                    r.method.clone(),
                    key.clone(),
                    format_number(num),
                    r.task.clone(),
                    r.metric.clone(),
                ))
                .or_insert((0.0, 0));
            entry.0 += r.value;
            entry.1 += 1;
        }
    }
    acc.into_iter()
        .map(
            |((family, method, hyperparam, value, task, metric), (sum, n))| SensitivityRow {
                family,
                method,
                hyperparam,
                value: value.parse().unwrap(),
                task,
                metric,
                mean: sum / n as f64,
                n,
            },
        )
        .collect()
}

fn format_number(x: f64) -> String {
    // shortest stable decimal form so grid values group exactly
    format!("{x}")
}

/// Graph-level statistics loaded from a sweep's dataset_stats.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub dataset: String,
    pub transitivity: f64,
    pub density: f64,
    pub avg_clustering: f64,
}

pub fn read_dataset_stats(path: &Path) -> Result<Vec<DatasetStats>, ReportError> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, ReportError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReportError::MissingColumns(format!("dataset_stats: {name}")))
    };
    let (c_name, c_tr, c_de, c_cl) = (
        col("dataset")?,
        col("transitivity")?,
        col("density")?,
        col("avg_clustering")?,
    );
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| -> f64 { record[i].parse().unwrap_or(f64::NAN) };
        out.push(DatasetStats {
            dataset: record[c_name].to_string(),
            transitivity: parse(c_tr),
            density: parse(c_de),
            avg_clustering: parse(c_cl),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// SVG emission
// ---------------------------------------------------------------------------

const CHART_W: f64 = 860.0;
const CHART_H: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 96.0;

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn svg_open(title: &str, data_table: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CHART_W}\" height=\"{CHART_H}\" \
         viewBox=\"0 0 {CHART_W} {CHART_H}\" font-family=\"sans-serif\">\n\
         <metadata id=\"data-table\"><![CDATA[\n{data_table}]]></metadata>\n\
         <rect width=\"{CHART_W}\" height=\"{CHART_H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        CHART_W / 2.0,
        xml_escape(title)
    )
}

fn y_scale(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    // a little headroom so the tallest mark is not clipped
    let pad = 0.05 * (hi - lo).max(1e-9);
    (lo - if lo < 0.0 { pad } else { 0.0 }, hi + pad)
}

fn y_axis(svg: &mut String, lo: f64, hi: f64, label: &str) {
    let plot_h = CHART_H - MARGIN_T - MARGIN_B;
    let ticks = 5usize;
    for i in 0..=ticks {
        let frac = i as f64 / ticks as f64;
        let value = lo + frac * (hi - lo);
        let y = CHART_H - MARGIN_B - frac * plot_h;
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{:.3}</text>\n",
            CHART_W - MARGIN_R,
            MARGIN_L - 6.0,
            y + 4.0,
            value
        ));
    }
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-size=\"12\" transform=\"rotate(-90 16 {:.1})\" \
         text-anchor=\"middle\">{}</text>\n",
        CHART_H / 2.0,
        CHART_H / 2.0,
        xml_escape(label)
    ));
}

fn legend(svg: &mut String, names: &[String]) {
    let mut x = MARGIN_L;
    let y = CHART_H - 14.0;
    for (i, name) in names.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        svg.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n\
             <text x=\"{:.1}\" y=\"{y:.1}\" font-size=\"11\">{}</text>\n",
            y - 9.0,
            x + 14.0,
            xml_escape(name)
        ));
        x += 14.0 + 7.0 * name.len() as f64 + 18.0;
    }
}

/// Grouped bar chart: one group per entry of `groups`, one bar per series.
/// `values[s][g]` is series s at group g (None leaves a gap).
pub fn svg_bar_chart(
    title: &str,
    y_label: &str,
    groups: &[String],
    series: &[String],
    values: &[Vec<Option<f64>>],
    data_table: &str,
) -> String {
    let mut svg = svg_open(title, data_table);
    let (lo, hi) = y_scale(values.iter().flatten().flatten().copied());
    y_axis(&mut svg, lo, hi, y_label);
    let plot_w = CHART_W - MARGIN_L - MARGIN_R;
    let plot_h = CHART_H - MARGIN_T - MARGIN_B;
    let group_w = plot_w / groups.len().max(1) as f64;
    let bar_w = (group_w * 0.8) / series.len().max(1) as f64;
    let baseline_frac = (0.0 - lo) / (hi - lo);
    let y_zero = CHART_H - MARGIN_B - baseline_frac.clamp(0.0, 1.0) * plot_h;
    for (gi, group) in groups.iter().enumerate() {
        let gx = MARGIN_L + gi as f64 * group_w;
        for (si, _) in series.iter().enumerate() {
            let Some(Some(v)) = values.get(si).map(|col| col.get(gi).copied().flatten().map(Some).unwrap_or(None)) else {
                continue;
            };
            let frac = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            let y = CHART_H - MARGIN_B - frac * plot_h;
            let (top, height) = if v >= 0.0 {
                (y, (y_zero - y).max(0.5))
            } else {
                (y_zero, (y - y_zero).max(0.5))
            };
            let x = gx + group_w * 0.1 + si as f64 * bar_w;
            svg.push_str(&format!(
                "<rect class=\"bar\" x=\"{x:.1}\" y=\"{top:.1}\" width=\"{:.1}\" height=\"{height:.1}\" \
                 fill=\"{}\"><title>{}: {v:.4}</title></rect>\n",
                bar_w * 0.92,
                PALETTE[si % PALETTE.len()],
                xml_escape(&format!("{group} / {}", series[si])),
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" \
             transform=\"rotate(-35 {:.1} {:.1})\">{}</text>\n",
            gx + group_w / 2.0,
            CHART_H - MARGIN_B + 16.0,
            gx + group_w / 2.0,
            CHART_H - MARGIN_B + 16.0,
            xml_escape(group)
        ));
    }
    legend(&mut svg, series);
    svg.push_str("</svg>\n");
    svg
}

/// Line chart over numeric x values; one polyline per series.
pub fn svg_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    xs: &[f64],
    series: &[(String, Vec<Option<f64>>)],
    data_table: &str,
) -> String {
    let mut svg = svg_open(title, data_table);
    let (lo, hi) = y_scale(series.iter().flat_map(|(_, v)| v.iter().flatten().copied()));
    y_axis(&mut svg, lo, hi, y_label);
    let plot_w = CHART_W - MARGIN_L - MARGIN_R;
    let plot_h = CHART_H - MARGIN_T - MARGIN_B;
    let (x_min, x_max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let span = (x_max - x_min).max(1e-12);
    let x_pos = |x: f64| MARGIN_L + (x - x_min) / span * plot_w;
    let y_pos = |v: f64| CHART_H - MARGIN_B - ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * plot_h;
    for &x in xs {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            x_pos(x),
            CHART_H - MARGIN_B + 18.0,
            format_number(x)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        CHART_H - MARGIN_B + 40.0,
        xml_escape(x_label)
    ));
    for (si, (_, values)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut points = Vec::new();
        for (&x, v) in xs.iter().zip(values) {
            if let Some(v) = v {
                points.push(format!("{:.1},{:.1}", x_pos(x), y_pos(*v)));
                svg.push_str(&format!(
                    "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                    x_pos(x),
                    y_pos(*v)
                ));
            }
        }
        if points.len() >= 2 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                points.join(" ")
            ));
        }
    }
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    legend(&mut svg, &names);
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// Report driver
// ---------------------------------------------------------------------------

fn best_csv(best: &[BestRow]) -> String {
    let mut out = String::from("dataset,family,method,task,metric,value,seeds,grid_points\n");
    for b in best {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            b.dataset, b.family, b.method, b.task, b.metric, b.value, b.seeds, b.grid_points
        ));
    }
    out
}

fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    let mut out = String::from("family,method,hyperparam,value,task,metric,mean,n\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.family, r.method, r.hyperparam, r.value, r.task, r.metric, r.mean, r.n
        ));
    }
    out
}

/// Generate every table and chart from a results CSV into `out_dir`.
/// `stats_path` (a sweep's dataset_stats.csv) enables the
/// statistic-vs-performance charts when present.
pub fn generate_report(
    results_path: &Path,
    stats_path: Option<&Path>,
    out_dir: &Path,
) -> Result<ReportSummary, ReportError> {
    let rows = read_results(results_path)?;
    if rows.is_empty() {
        return Err(ReportError::EmptyResults);
    }
    fs::create_dir_all(out_dir)?;
    let mut tables = Vec::new();
    let mut charts = Vec::new();

    // ---- best-performance table and per-task grouped bars
    let best = best_table(&rows);
    let best_path = out_dir.join("best.csv");
    fs::write(&best_path, best_csv(&best))?;
    tables.push(best_path);

    let tasks: BTreeSet<String> = best.iter().map(|b| b.task.clone()).collect();
    for task in &tasks {
        let subset: Vec<&BestRow> = best.iter().filter(|b| &b.task == task).collect();
        let datasets: Vec<String> = subset
            .iter()
            .map(|b| b.dataset.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let methods: Vec<String> = subset
            .iter()
            .map(|b| b.method.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut values = vec![vec![None; datasets.len()]; methods.len()];
        for b in &subset {
            let si = methods.iter().position(|m| m == &b.method).unwrap();
            let gi = datasets.iter().position(|d| d == &b.dataset).unwrap();
            values[si][gi] = Some(b.value);
        }
        let metric = subset[0].metric.clone();
        let table: String = best_csv(&subset.iter().map(|b| (*b).clone()).collect::<Vec<_>>());
        let svg = svg_bar_chart(
            &format!("Best {task} by method ({metric})"),
            &metric,
            &datasets,
            &methods,
            &values,
            &table,
        );
        let path = out_dir.join(format!("bars_{task}.svg"));
        fs::write(&path, svg)?;
        charts.push(path);
    }

    // ---- hyperparameter sensitivity lines
    let sensitivity = sensitivity_table(&rows);
    let sens_path = out_dir.join("hyper_sensitivity.csv");
    fs::write(&sens_path, sensitivity_csv(&sensitivity))?;
    tables.push(sens_path);

    let combos: BTreeSet<(String, String, String)> = sensitivity
        .iter()
        .map(|r| (r.family.clone(), r.method.clone(), r.hyperparam.clone()))
        .collect();
    for (family, method, hyperparam) in combos {
        let subset: Vec<&SensitivityRow> = sensitivity
            .iter()
            .filter(|r| r.family == family && r.method == method && r.hyperparam == hyperparam)
            .collect();
        let mut xs: Vec<f64> = subset.iter().map(|r| r.value).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        if xs.len() < 2 {
            continue; // a single grid value has no sensitivity to draw
        }
        let tasks: Vec<String> = subset
            .iter()
            .map(|r| r.task.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut series = Vec::new();
        for task in &tasks {
            let mut line = Vec::new();
            for &x in &xs {
                line.push(
                    subset
                        .iter()
                        .find(|r| &r.task == task && r.value == x)
                        .map(|r| r.mean),
                );
            }
            series.push((task.clone(), line));
        }
        let table = sensitivity_csv(&subset.iter().map(|r| (*r).clone()).collect::<Vec<_>>());
        let svg = svg_line_chart(
            &format!("{method}: {hyperparam} sensitivity ({family} graphs)"),
            &hyperparam,
            "mean score",
            &xs,
            &series,
            &table,
        );
        let path = out_dir.join(format!("hyper_{family}_{method}_{hyperparam}.svg"));
        fs::write(&path, svg)?;
        charts.push(path);
    }

    // ---- graph-statistic vs performance lines
    if let Some(stats_path) = stats_path {
        if stats_path.exists() {
            let stats = read_dataset_stats(stats_path)?;
            let stat_of = |name: &str, s: &DatasetStats| -> f64 {
                match name {
                    "transitivity" => s.transitivity,
                    "density" => s.density,
                    _ => s.avg_clustering,
                }
            };
            for stat_name in ["transitivity", "density", "avg_clustering"] {
                for task in &tasks {
                    let subset: Vec<&BestRow> =
                        best.iter().filter(|b| &b.task == task).collect();
                    let mut dataset_stats: Vec<(&DatasetStats, f64)> = stats
                        .iter()
                        .filter(|s| subset.iter().any(|b| b.dataset == s.dataset))
                        .map(|s| (s, stat_of(stat_name, s)))
                        .collect();
                    if dataset_stats.len() < 2 {
                        continue;
                    }
                    dataset_stats.sort_by(|a, b| a.1.total_cmp(&b.1));
                    let xs: Vec<f64> = dataset_stats.iter().map(|(_, x)| *x).collect();
                    let methods: Vec<String> = subset
                        .iter()
                        .map(|b| b.method.clone())
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect();
                    let mut series = Vec::new();
                    for method in &methods {
                        let line: Vec<Option<f64>> = dataset_stats
                            .iter()
                            .map(|(s, _)| {
                                subset
                                    .iter()
                                    .find(|b| &b.method == method && b.dataset == s.dataset)
                                    .map(|b| b.value)
                            })
                            .collect();
                        series.push((method.clone(), line));
                    }
                    let table = best_csv(
                        &subset.iter().map(|b| (*b).clone()).collect::<Vec<_>>(),
                    );
                    let svg = svg_line_chart(
                        &format!("{task} vs {stat_name}"),
                        stat_name,
                        "best score",
                        &xs,
                        &series,
                        &table,
                    );
                    let path = out_dir.join(format!("stats_{stat_name}_{task}.svg"));
                    fs::write(&path, svg)?;
                    charts.push(path);
                }
            }
        }
    }

    Ok(ReportSummary { tables, charts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn row(
        dataset: &str,
        method: &str,
        task: &str,
        metric: &str,
        value: f64,
        seed: u64,
        hyper: &str,
    ) -> ResultRow {
        ResultRow {
            dataset: dataset.into(),
            generator_params: format!("{{\"family\":\"{}\",\"n\":100,\"seed\":1}}",
                if dataset.starts_with("er") { "er" } else { "ba" }),
            method: method.into(),
            hyperparam_json: hyper.into(),
            task: task.into(),
            metric: metric.into(),
            value,
            seed,
            wallclock_s: 1.0,
        }
    }

    fn write_results(dir: &Path, rows: &[ResultRow]) -> PathBuf {
        let path = dir.join("results.csv");
        let mut w = csv::Writer::from_path(&path).unwrap();
        for r in rows {
            w.serialize(r).unwrap();
        }
        w.flush().unwrap();
        path
    }

    #[test]
    fn best_table_takes_grid_max_then_seed_median() {
        let rows = vec![
            // seed 0: grid values 0.6 and 0.8 → 0.8
            row("ba-1", "deepwalk", "degree", "r2", 0.6, 0, "{\"dim\":32}"),
            row("ba-1", "deepwalk", "degree", "r2", 0.8, 0, "{\"dim\":64}"),
            // seed 1: 0.7 and 0.4 → 0.7
            row("ba-1", "deepwalk", "degree", "r2", 0.7, 1, "{\"dim\":32}"),
            row("ba-1", "deepwalk", "degree", "r2", 0.4, 1, "{\"dim\":64}"),
            // seed 2: single value 0.9 → 0.9
            row("ba-1", "deepwalk", "degree", "r2", 0.9, 2, "{\"dim\":32}"),
        ];
        let best = best_table(&rows);
        assert_eq!(best.len(), 1);
        // per-seed maxima are (0.8, 0.7, 0.9); median = 0.8
        assert_eq!(best[0].value, 0.8);
        assert_eq!(best[0].seeds, 3);
        assert_eq!(best[0].grid_points, 2);
        assert_eq!(best[0].family, "ba");
    }

    #[test]
    fn duplicate_rows_collapse_by_max() {
        let rows = vec![
            row("ba-1", "deepwalk", "degree", "r2", 0.5, 0, "{\"dim\":32}"),
            // an interrupted sweep re-ran the same point and appended again
            row("ba-1", "deepwalk", "degree", "r2", 0.3, 0, "{\"dim\":32}"),
        ];
        let best = best_table(&rows);
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].value, 0.5);
    }

    #[test]
    fn sensitivity_means_group_by_hyperparam_value() {
        let rows = vec![
            row("ba-1", "deepwalk", "degree", "r2", 0.2, 0, "{\"dim\":32,\"ns_exponent\":0.75}"),
            row("ba-2", "deepwalk", "degree", "r2", 0.4, 0, "{\"dim\":32,\"ns_exponent\":0.75}"),
            row("ba-1", "deepwalk", "degree", "r2", 0.9, 0, "{\"dim\":64,\"ns_exponent\":0.75}"),
        ];
        let table = sensitivity_table(&rows);
        let dim32 = table
            .iter()
            .find(|r| r.hyperparam == "dim" && r.value == 32.0)
            .unwrap();
        assert!((dim32.mean - 0.3).abs() < 1e-12);
        assert_eq!(dim32.n, 2);
        let dim64 = table
            .iter()
            .find(|r| r.hyperparam == "dim" && r.value == 64.0)
            .unwrap();
        assert_eq!(dim64.mean, 0.9);
        // ns_exponent has a single value so it groups all three rows
        let ns = table
            .iter()
            .find(|r| r.hyperparam == "ns_exponent")
            .unwrap();
        assert_eq!(ns.n, 3);
    }

    #[test]
    fn report_emits_tables_and_charts() {
        let dir = tempdir().unwrap();
        let rows = vec![
            row("ba-1", "deepwalk", "degree", "r2", 0.7, 0, "{\"dim\":32}"),
            row("ba-1", "deepwalk", "degree", "r2", 0.8, 0, "{\"dim\":64}"),
            row("ba-1", "gcn", "degree", "r2", 0.6, 0, "{\"dim\":32,\"max_degree\":100}"),
            row("er-1", "deepwalk", "degree", "r2", 0.5, 0, "{\"dim\":32}"),
            row("ba-1", "deepwalk", "link_prediction", "auc", 0.9, 0, "{\"dim\":32}"),
        ];
        let results = write_results(dir.path(), &rows);
        // stats file for the statistic-performance charts
        let stats_path = dir.path().join("dataset_stats.csv");
        fs::write(
            &stats_path,
            "dataset,family,nodes,edges,transitivity,density,avg_clustering,modularity,communities\n\
             ba-1,ba,100,300,0.1,0.06,0.12,0.3,4\n\
             er-1,er,100,250,0.05,0.05,0.05,0.2,5\n",
        )
        .unwrap();
        let out = dir.path().join("report");
        let summary = generate_report(&results, Some(&stats_path), &out).unwrap();
        assert!(summary.tables.iter().any(|p| p.ends_with("best.csv")));
        assert!(summary
            .charts
            .iter()
            .any(|p| p.file_name().unwrap() == "bars_degree.svg"));
        let bars = fs::read_to_string(out.join("bars_degree.svg")).unwrap();
        assert!(bars.starts_with("<svg"));
        assert!(bars.contains("data-table"));
        // three best rows for the degree task → three bars
        assert_eq!(bars.matches("class=\"bar\"").count(), 3);
        // dim took two values for deepwalk → sensitivity line chart exists
        assert!(out.join("hyper_ba_deepwalk_dim.svg").exists());
        // stats charts drawn across the two datasets
        assert!(out.join("stats_transitivity_degree.svg").exists());
    }

    #[test]
    fn single_result_row_yields_a_single_bar() {
        let dir = tempdir().unwrap();
        let rows = vec![row("ba-1", "deepwalk", "degree", "r2", 0.7, 0, "{\"dim\":32}")];
        let results = write_results(dir.path(), &rows);
        let out = dir.path().join("report");
        generate_report(&results, None, &out).unwrap();
        let bars = fs::read_to_string(out.join("bars_degree.svg")).unwrap();
        assert_eq!(bars.matches("class=\"bar\"").count(), 1);
    }

    #[test]
    fn empty_results_error() {
        let dir = tempdir().unwrap();
        let path = write_results(dir.path(), &[]);
        assert!(matches!(
            generate_report(&path, None, dir.path()),
            Err(ReportError::EmptyResults) | Err(ReportError::MissingColumns(_))
        ));
    }

    #[test]
    fn missing_columns_are_reported() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("broken.csv");
        fs::write(&path, "dataset,value\nba-1,0.5\n").unwrap();
        assert!(matches!(
            generate_report(&path, None, dir.path()),
            Err(ReportError::MissingColumns(_))
        ));
    }
}
