//! One function per subcommand; all user-facing I/O lives here.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use grl_core::embedding::read_embedding;
use grl_core::eval::{
    edge_split, link_prediction_auc, property_task, ForestGrid, SplitKind, SplitSpec, Task,
};
use grl_core::generate::GeneratorSpec;
use grl_core::gnn::{train_unsupervised, GnnConfig};
use grl_core::graph::{load_edge_list, write_edge_list, Graph};
use grl_core::metrics::{compute_properties, write_property_csv};
use grl_core::multiset::{degree_features, neighborhood_collision_rate, Aggregator};
use grl_core::report::generate_report;
use grl_core::rng::{derive_seed, RNG_ALGORITHM};
use grl_core::skipgram::{train_skipgram, SkipGramConfig, TrainMode};
use grl_core::sweep::{
    enumerate_sweep_with, run_sweep_with, walk_pre_search, ExperimentConfig, ResultRow,
    WalkOverrides,
};
use grl_core::walks::{
    biased_walks, spectral_summary, uniform_walks, verify_convergence, verify_degree_balance,
    WalkParams,
};

use crate::{
    CliError, EmbedArgs, EvaluateArgs, GenerateArgs, MultisetReportArgs, PropertiesArgs,
    ReportArgs, SweepArgs, VerifyLemmasArgs,
};

/// Certification tolerances, matching the library's stated guarantees.
const BALANCE_TOLERANCE: f64 = 1e-9;
const CONVERGENCE_TOLERANCE: f64 = 1e-6;
const SPECTRAL_TOLERANCE: f64 = 1e-9;

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", path.display()))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    let (g, report) = load_edge_list(path, None).map_err(CliError::config)?;
    if report.self_loops_dropped > 0 || report.duplicate_edges_dropped > 0 {
        eprintln!(
            "note: dropped {} self-loop(s) and {} duplicate edge(s) while loading {}",
            report.self_loops_dropped,
            report.duplicate_edges_dropped,
            path.display()
        );
    }
    Ok(g)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(CliError::config)?;
    text.push('\n');
    fs::write(path, text).map_err(CliError::config)
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let spec = GeneratorSpec {
        family: args.family,
        n: args.n,
        m: args.m,
        p: args.p,
        seed: args.seed,
    };
    let g = spec.generate().map_err(CliError::config)?;
    write_edge_list(&g, &args.out).map_err(CliError::config)?;
    let meta = json!({
        "family": args.family.to_string(),
        "n": args.n,
        "m": args.m,
        "p": args.p,
        "seed": args.seed,
        "nodes": g.num_nodes(),
        "edges": g.num_edges(),
    });
    let meta_path = sibling(&args.out, ".meta.json");
    write_json(&meta_path, &meta)?;
    println!(
        "generated {} ({} nodes, {} edges) -> {} (+ {})",
        spec.label(),
        g.num_nodes(),
        g.num_edges(),
        args.out.display(),
        meta_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// properties
// ---------------------------------------------------------------------------

pub fn properties(args: &PropertiesArgs) -> Result<(), CliError> {
    let g = load_graph(&args.graph)?;
    let table = compute_properties(&g, args.seed).map_err(CliError::config)?;
    write_property_csv(&table, &g, &args.out).map_err(CliError::config)?;
    let stats = table.graph_stats(&g);
    let stats_path = sibling(&args.out, ".stats.json");
    write_json(
        &stats_path,
        &serde_json::to_value(&stats).map_err(CliError::config)?,
    )?;
    println!(
        "{} nodes, {} edges, {} communities -> {} (+ {})",
        stats.nodes,
        stats.edges,
        stats.communities,
        args.out.display(),
        stats_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

pub fn embed(args: &EmbedArgs) -> Result<(), CliError> {
    let g = load_graph(&args.graph)?;
    let walk_seed = derive_seed(args.seed, 11);
    let train_seed = derive_seed(args.seed, 12);
    let started = Instant::now();
    let (emb, mode) = if args.method.is_shallow() {
        let params = WalkParams {
            num_walks: args.num_walks,
            walk_length: args.walk_length,
            p_return: args.p,
            q_inout: args.q,
            seed: walk_seed,
        };
        let corpus = if args.method == grl_core::sweep::Method::Deepwalk {
            uniform_walks(
                &g,
                &WalkParams::uniform(args.num_walks, args.walk_length, walk_seed),
            )
        } else {
            biased_walks(&g, &params).map_err(CliError::config)?
        };
        let workers = crate::thread_cap()
            .map(|cap| args.workers.min(cap))
            .unwrap_or(args.workers)
            .max(1);
        let mode = if workers > 1 {
            TrainMode::Hogwild { workers }
        } else {
            TrainMode::Deterministic
        };
        let config = SkipGramConfig {
            dim: args.dim,
            window: args.window,
            negatives: args.negatives,
            ns_exponent: args.ns_exponent,
            subsample_freq: args.subsample_freq,
            epochs: args.epochs,
            learning_rate: args.learning_rate.unwrap_or(0.025),
            seed: train_seed,
            mode,
        };
        let (emb, stats) = train_skipgram(&g, &corpus, &config).map_err(CliError::config)?;
        (emb, stats.mode)
    } else {
        let arch = args.method.arch().expect("message-passing method");
        let config = GnnConfig {
            arch,
            dim: args.dim,
            hidden_dim: args.hidden_dim,
            max_degree: args.max_degree,
            sample_sizes: (args.s1, args.s2),
            attention_heads: args.heads,
            epochs: args.epochs,
            learning_rate: args.learning_rate.unwrap_or(0.05),
            momentum: args.momentum,
            negatives: args.negatives,
            batch_size: args.batch_size,
            seed: train_seed,
            ..GnnConfig::default()
        };
        let (emb, stats) = train_unsupervised(&g, &config).map_err(CliError::config)?;
        (emb, stats.mode)
    };
    let wallclock_s = started.elapsed().as_secs_f64();
    emb.write_to(&g, &args.out).map_err(CliError::config)?;
    let config_value: serde_json::Value =
        serde_json::from_str(&emb.config_json).unwrap_or(serde_json::Value::Null);
    let meta = json!({
        "method": args.method.name(),
        "mode": mode,
        "rng": RNG_ALGORITHM,
        "graph": args.graph.display().to_string(),
        "graph_fingerprint": emb.graph_fingerprint,
        "nodes": emb.num_nodes(),
        "dim": emb.dim(),
        "seed": args.seed,
        "config": config_value,
        "wallclock_s": wallclock_s,
    });
    let meta_path = sibling(&args.out, ".meta.json");
    write_json(&meta_path, &meta)?;
    println!(
        "{}: {} nodes x {} dims in {:.2}s ({} mode) -> {} (+ {})",
        args.method.name(),
        emb.num_nodes(),
        emb.dim(),
        wallclock_s,
        mode,
        args.out.display(),
        meta_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn parse_tasks(spec: &str) -> Result<Vec<Task>, CliError> {
    if spec.trim() == "all" {
        let mut tasks = vec![Task::LinkPrediction];
        tasks.extend(Task::PROPERTY_TASKS);
        return Ok(tasks);
    }
    spec.split(',')
        .map(|s| s.trim().parse::<Task>().map_err(CliError::Config))
        .collect()
}

/// Pull a string field out of an embedding's sidecar metadata, if it exists.
fn sidecar_field(embedding: &Path, field: &str) -> Option<serde_json::Value> {
    let text = fs::read_to_string(sibling(embedding, ".meta.json")).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value.get(field).cloned()
}

fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    let write_header = !path.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(CliError::config)?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(write_header)
        .from_writer(file);
    for row in rows {
        writer.serialize(row).map_err(CliError::config)?;
    }
    writer.flush().map_err(CliError::config)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    if !(args.train_fraction > 0.0 && args.train_fraction < 1.0) {
        return Err(CliError::Config(format!(
            "train fraction must be in (0, 1), got {}",
            args.train_fraction
        )));
    }
    let g = load_graph(&args.graph)?;
    let (emb, _row_ids) = read_embedding(&args.embedding).map_err(CliError::config)?;
    if emb.num_nodes() != g.num_nodes() {
        return Err(CliError::Config(format!(
            "embedding has {} rows but the graph has {} nodes",
            emb.num_nodes(),
            g.num_nodes()
        )));
    }
    let tasks = parse_tasks(&args.tasks)?;
    let grid = match args.forest.as_str() {
        "full" => ForestGrid::default(),
        "small" => ForestGrid::small(),
        other => {
            return Err(CliError::Config(format!(
                "unknown forest grid {other:?} (expected \"full\" or \"small\")"
            )))
        }
    };
    let dataset = args
        .dataset
        .clone()
        .unwrap_or_else(|| file_stem(&args.graph));
    let method = args
        .method
        .clone()
        .or_else(|| {
            sidecar_field(&args.embedding, "method")
                .and_then(|v| v.as_str().map(String::from))
        })
        .unwrap_or_else(|| "unknown".to_string());
    let hyperparam_json = sidecar_field(&args.embedding, "config")
        .filter(|v| !v.is_null())
        .map(|v| v.to_string())
        .unwrap_or_else(|| "{}".to_string());
    let generator_params = format!(
        "{{\"path\":{}}}",
        serde_json::to_string(&args.graph).map_err(CliError::config)?
    );

    let needs_properties = tasks.iter().any(|&t| t != Task::LinkPrediction);
    // community labels use the same fixed seed the sweep uses, so standalone
    // evaluations are comparable with sweep rows on the same graph
    let table = if needs_properties {
        Some(compute_properties(&g, 0).map_err(CliError::config)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &task in &tasks {
        let started = Instant::now();
        let outcome: Result<(&'static str, f64), String> = if task == Task::LinkPrediction {
            let spec = SplitSpec {
                kind: SplitKind::Edge,
                train_fraction: args.train_fraction,
                seed: args.seed,
            };
            edge_split(&g, &spec)
                .and_then(|split| link_prediction_auc(&emb, &split.positives, &split.negatives))
                .map(|auc| ("auc", auc))
                .map_err(|e| e.to_string())
        } else {
            let spec = SplitSpec {
                kind: SplitKind::Node,
                train_fraction: args.train_fraction,
                seed: args.seed,
            };
            property_task(&emb, table.as_ref().unwrap(), task, &grid, &spec)
                .map(|r| (r.metric.name(), r.value))
                .map_err(|e| e.to_string())
        };
        match outcome {
            Ok((metric, value)) => {
                println!("{}: {metric} = {value:.4}", task.name());
                rows.push(ResultRow {
                    dataset: dataset.clone(),
                    generator_params: generator_params.clone(),
                    method: method.clone(),
                    hyperparam_json: hyperparam_json.clone(),
                    task: task.name().to_string(),
                    metric: metric.to_string(),
                    value,
                    seed: args.seed,
                    wallclock_s: started.elapsed().as_secs_f64(),
                });
            }
            Err(message) => {
                eprintln!("{}: failed: {message}", task.name());
                failures.push(task.name());
            }
        }
    }
    append_rows(&args.out, &rows)?;
    println!(
        "appended {} row(s) to {}",
        rows.len(),
        args.out.display()
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Partial(format!(
            "{} of {} task(s) failed: {}",
            failures.len(),
            tasks.len(),
            failures.join(", ")
        )))
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let config = ExperimentConfig::from_path(&args.config).map_err(CliError::config)?;
    let mut overrides = WalkOverrides::new();
    if args.pre_search && args.dry_run {
        println!("note: --dry-run skips the pre-search; run ids below assume the config's walk settings");
    } else if args.pre_search {
        let mut winners = Vec::new();
        for dataset in &config.datasets {
            let g = dataset.load().map_err(CliError::config)?;
            for method in &config.methods {
                let (settings, auc) =
                    walk_pre_search(&g, method.name, &config.walk_grid, config.seeds[0])
                        .map_err(CliError::config)?;
                println!(
                    "pre-search {} x {}: num_walks={} walk_length={} epochs={} (link auc {:.4})",
                    dataset.name,
                    method.name.name(),
                    settings.num_walks,
                    settings.walk_length,
                    settings.epochs,
                    auc
                );
                winners.push(json!({
                    "dataset": dataset.name,
                    "method": method.name.name(),
                    "num_walks": settings.num_walks,
                    "walk_length": settings.walk_length,
                    "epochs": settings.epochs,
                    "link_auc": auc,
                }));
                overrides.insert(
                    (dataset.name.clone(), method.name.name().to_string()),
                    settings,
                );
            }
        }
        fs::create_dir_all(&config.output_dir).map_err(CliError::config)?;
        write_json(
            &config.output_dir.join("pre_search.json"),
            &serde_json::Value::Array(winners),
        )?;
    }

    // report the cross product before executing anything
    let runs = enumerate_sweep_with(&config, &overrides).map_err(CliError::config)?;
    let mut breakdown: BTreeMap<(String, String), usize> = BTreeMap::new();
    for run in &runs {
        *breakdown
            .entry((run.dataset.clone(), run.method.name().to_string()))
            .or_default() += 1;
    }
    println!(
        "cross product: {} runs ({} dataset(s) x {} method grid(s) x {} seed(s))",
        runs.len(),
        config.datasets.len(),
        config.methods.len(),
        config.seeds.len()
    );
    for ((dataset, method), count) in &breakdown {
        println!("  {dataset} x {method}: {count} runs");
    }
    if args.dry_run {
        return Ok(());
    }

    let threads = crate::resolve_threads(args.threads);
    println!("workers: {threads}");
    let summary = run_sweep_with(&config, threads, &overrides).map_err(CliError::config)?;
    println!(
        "executed {} run(s), skipped {} already-complete, {} run failure(s), {} task failure(s) in {:.1}s",
        summary.executed,
        summary.skipped,
        summary.failed_runs,
        summary.failed_tasks,
        summary.wallclock_s
    );
    println!("results: {}", summary.results_path.display());
    if summary.failed_runs > 0 || summary.failed_tasks > 0 {
        Err(CliError::Partial(format!(
            "sweep finished with {} failed run(s) and {} failed task(s); see {}",
            summary.failed_runs,
            summary.failed_tasks,
            summary.results_path.with_file_name("errors.log").display()
        )))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    let stats_path = args.stats.clone().or_else(|| {
        let sibling = args.results.parent()?.join("dataset_stats.csv");
        sibling.exists().then_some(sibling)
    });
    let summary = generate_report(&args.results, stats_path.as_deref(), &args.out)
        .map_err(CliError::config)?;
    for table in &summary.tables {
        println!("table: {}", table.display());
    }
    for chart in &summary.charts {
        println!("chart: {}", chart.display());
    }
    println!(
        "{} table(s), {} chart(s) -> {}",
        summary.tables.len(),
        summary.charts.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// verify-lemmas
// ---------------------------------------------------------------------------

pub fn verify_lemmas(args: &VerifyLemmasArgs) -> Result<(), CliError> {
    let g = load_graph(&args.graph)?;
    let mut all_pass = true;
    let mut lemmas = serde_json::Map::new();

    // deg(u)·P^t(u,v) is symmetric in (u,v) for every power t
    let balance = match verify_degree_balance(&g, args.t_max) {
        Ok(deviation) => {
            let pass = deviation < BALANCE_TOLERANCE;
            all_pass &= pass;
            println!(
                "degree_balance: {} (max deviation {deviation:.3e}, t <= {})",
                if pass { "pass" } else { "FAIL" },
                args.t_max
            );
            json!({
                "pass": pass,
                "max_deviation": deviation,
                "t_max": args.t_max,
                "tolerance": BALANCE_TOLERANCE,
            })
        }
        Err(e) => {
            all_pass = false;
            println!("degree_balance: FAIL ({e})");
            json!({ "pass": false, "error": e.to_string() })
        }
    };
    lemmas.insert("degree_balance".to_string(), balance);

    // transition rows converge to the degree-proportional distribution
    let convergence = match verify_convergence(&g, args.convergence_t) {
        Ok(gap) => {
            let pass = gap < CONVERGENCE_TOLERANCE;
            all_pass &= pass;
            println!(
                "stationary_convergence: {} (max row L1 gap {gap:.3e} at t = {})",
                if pass { "pass" } else { "FAIL" },
                args.convergence_t
            );
            json!({
                "pass": pass,
                "l1_gap": gap,
                "t": args.convergence_t,
                "tolerance": CONVERGENCE_TOLERANCE,
            })
        }
        Err(e) => {
            all_pass = false;
            println!("stationary_convergence: FAIL ({e})");
            json!({ "pass": false, "error": e.to_string() })
        }
    };
    lemmas.insert("stationary_convergence".to_string(), convergence);

    // the transition spectrum is real, bounded by 1, and led by lambda_1 = 1
    let spectral = match spectral_summary(&g) {
        Ok(summary) => {
            let lambda1 = summary.eigenvalues.first().copied().unwrap_or(f64::NAN);
            let radius = summary
                .eigenvalues
                .iter()
                .fold(0.0f64, |acc, &x| acc.max(x.abs()));
            let pass = (lambda1 - 1.0).abs() <= SPECTRAL_TOLERANCE
                && radius <= 1.0 + SPECTRAL_TOLERANCE;
            all_pass &= pass;
            println!(
                "spectral: {} (lambda_1 = {lambda1:.12}, radius = {radius:.12}, gap = {:.6})",
                if pass { "pass" } else { "FAIL" },
                summary.spectral_gap()
            );
            json!({
                "pass": pass,
                "lambda_1": lambda1,
                "spectral_radius": radius,
                "spectral_gap": summary.spectral_gap(),
                "tolerance": SPECTRAL_TOLERANCE,
            })
        }
        Err(e) => {
            all_pass = false;
            println!("spectral: FAIL ({e})");
            json!({ "pass": false, "error": e.to_string() })
        }
    };
    lemmas.insert("spectral".to_string(), spectral);

    let report = json!({
        "graph": args.graph.display().to_string(),
        "nodes": g.num_nodes(),
        "edges": g.num_edges(),
        "rng": RNG_ALGORITHM,
        "lemmas": serde_json::Value::Object(lemmas),
        "all_pass": all_pass,
    });
    write_json(&args.report, &report)?;
    println!("report: {}", args.report.display());
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Partial(
            "one or more walk properties failed to certify on this graph".to_string(),
        ))
    }
}

// ---------------------------------------------------------------------------
// multiset-report
// ---------------------------------------------------------------------------

pub fn multiset_report(args: &MultisetReportArgs) -> Result<(), CliError> {
    let g = load_graph(&args.graph)?;
    let features = match args.features.as_str() {
        "degrees" => degree_features(&g, false),
        "degree-onehot" => degree_features(&g, true),
        other => {
            return Err(CliError::Config(format!(
                "unknown feature set {other:?} (expected \"degrees\" or \"degree-onehot\")"
            )))
        }
    };
    let mut rates = serde_json::Map::new();
    for aggregator in Aggregator::ALL {
        let rate = neighborhood_collision_rate(&g, &features, aggregator);
        rates.insert(aggregator.name().to_string(), json!(rate));
    }
    let report = json!({
        "graph": args.graph.display().to_string(),
        "features": args.features,
        "nodes": g.num_nodes(),
        "collision_rates": serde_json::Value::Object(rates),
    });
    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            println!("report: {}", path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(CliError::config)?),
    }
    Ok(())
}
