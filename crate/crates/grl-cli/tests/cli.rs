//! End-to-end tests of the `grl-probe` binary: every subcommand, the file
//! formats it promises, and the documented exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn probe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grl-probe"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn generate_er(dir: &Path, name: &str, n: usize, p: f64, seed: u64) -> std::path::PathBuf {
    let path = dir.join(name);
    let out = run(probe()
        .args(["generate", "--family", "er", "--n"])
        .arg(n.to_string())
        .arg("--p")
        .arg(p.to_string())
        .arg("--seed")
        .arg(seed.to_string())
        .arg("--out")
        .arg(&path));
    assert_eq!(exit_code(&out), 0, "generate failed: {}", stderr(&out));
    path
}

#[test]
fn generate_writes_canonical_edges_and_sidecar() {
    let dir = tempdir().unwrap();
    let path = generate_er(dir.path(), "g.edges", 50, 0.1, 7);

    let text = fs::read_to_string(&path).unwrap();
    for line in text.lines() {
        let mut toks = line.split('\t');
        let u: u32 = toks.next().unwrap().parse().unwrap();
        let v: u32 = toks.next().unwrap().parse().unwrap();
        assert!(u < v, "canonical form puts the smaller endpoint first");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("g.edges.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["family"], "er");
    assert_eq!(meta["n"], 50);
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["edges"].as_u64().unwrap(), text.lines().count() as u64);

    // the same seed reproduces the same bytes
    let again = generate_er(dir.path(), "g2.edges", 50, 0.1, 7);
    assert_eq!(text, fs::read_to_string(again).unwrap());
}

#[test]
fn generate_rejects_missing_family_parameters() {
    let dir = tempdir().unwrap();
    let out = run(probe()
        .args(["generate", "--family", "ba", "--n", "50", "--out"])
        .arg(dir.path().join("bad.edges")));
    // ba needs --m; a config error exits 1
    assert_eq!(exit_code(&out), 1);
    assert!(!dir.path().join("bad.edges").exists());
}

#[test]
fn properties_emits_documented_columns_and_stats_sidecar() {
    let dir = tempdir().unwrap();
    let graph = generate_er(dir.path(), "g.edges", 40, 0.15, 3);
    let csv_path = dir.path().join("props.csv");
    let out = run(probe()
        .args(["properties", "--seed", "5", "--graph"])
        .arg(&graph)
        .arg("--out")
        .arg(&csv_path));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));

    let text = fs::read_to_string(&csv_path).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "node_id,degree,avg_neighbor_degree,triangles,clustering_coefficient,closeness,community"
    );
    assert_eq!(text.lines().count(), 41, "header plus one row per node");

    let stats: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("props.csv.stats.json")).unwrap(),
    )
    .unwrap();
    for key in [
        "nodes",
        "edges",
        "transitivity",
        "density",
        "avg_clustering",
        "modularity",
        "communities",
    ] {
        assert!(stats.get(key).is_some(), "stats sidecar missing {key}");
    }
    assert_eq!(stats["nodes"], 40);
}

#[test]
fn embed_writes_header_rows_and_metadata() {
    let dir = tempdir().unwrap();
    let graph = generate_er(dir.path(), "g.edges", 40, 0.15, 3);
    let emb_path = dir.path().join("dw.emb");
    let out = run(probe()
        .args([
            "embed",
            "--method",
            "deepwalk",
            "--dim",
            "8",
            "--num-walks",
            "4",
            "--walk-length",
            "12",
            "--epochs",
            "1",
            "--seed",
            "2",
            "--graph",
        ])
        .arg(&graph)
        .arg("--out")
        .arg(&emb_path));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));

    let text = fs::read_to_string(&emb_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "40 8", "header is \"N d\"");
    let first = lines.next().unwrap();
    assert_eq!(
        first.split_whitespace().count(),
        9,
        "node id plus 8 coordinates"
    );
    assert_eq!(text.lines().count(), 41);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dw.emb.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["method"], "deepwalk");
    assert_eq!(meta["mode"], "deterministic");
    assert_eq!(meta["rng"], "chacha8");
    assert_eq!(meta["dim"], 8);
    assert!(meta["config"].is_object(), "training config is embedded");
}

#[test]
fn embed_trains_message_passing_methods_too() {
    let dir = tempdir().unwrap();
    let graph = generate_er(dir.path(), "g.edges", 30, 0.2, 3);
    let emb_path = dir.path().join("gcn.emb");
    let out = run(probe()
        .args([
            "embed",
            "--method",
            "gcn",
            "--dim",
            "8",
            "--hidden-dim",
            "8",
            "--epochs",
            "1",
            "--graph",
        ])
        .arg(&graph)
        .arg("--out")
        .arg(&emb_path));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(&emb_path).unwrap().lines().next().unwrap(),
        "30 8"
    );
}

#[test]
fn evaluate_appends_rows_with_a_single_header() {
    let dir = tempdir().unwrap();
    let graph = generate_er(dir.path(), "g.edges", 40, 0.15, 3);
    let emb_path = dir.path().join("dw.emb");
    let out = run(probe()
        .args([
            "embed", "--method", "deepwalk", "--dim", "8", "--num-walks", "4", "--walk-length",
            "12", "--epochs", "1", "--graph",
        ])
        .arg(&graph)
        .arg("--out")
        .arg(&emb_path));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));

    let results = dir.path().join("results.csv");
    for seed in ["0", "1"] {
        let out = run(probe()
            .args([
                "evaluate",
                "--tasks",
                "link_prediction,degree",
                "--forest",
                "small",
                "--seed",
                seed,
                "--graph",
            ])
            .arg(&graph)
            .arg("--embedding")
            .arg(&emb_path)
            .arg("--out")
            .arg(&results));
        assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    }
    let text = fs::read_to_string(&results).unwrap();
    assert_eq!(text.lines().count(), 5, "one header plus 2x2 task rows");
    assert_eq!(
        text.matches("dataset,generator_params").count(),
        1,
        "appending must not repeat the header"
    );
    // method recovered from the embedding sidecar
    assert!(text.contains(",deepwalk,"));
    assert!(text.contains("link_prediction,auc,"));
    assert!(text.contains("degree,r2,"));
}

#[test]
fn evaluate_rejects_mismatched_embedding() {
    let dir = tempdir().unwrap();
    let graph = generate_er(dir.path(), "g.edges", 40, 0.15, 3);
    let emb_path = dir.path().join("tiny.emb");
    fs::write(&emb_path, "2 2\n0 0.1 0.2\n1 0.3 0.4\n").unwrap();
    let out = run(probe()
        .args(["evaluate", "--graph"])
        .arg(&graph)
        .arg("--embedding")
        .arg(&emb_path)
        .arg("--out")
        .arg(dir.path().join("r.csv")));
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("40 nodes"));
}

fn sweep_config(dir: &Path) -> std::path::PathBuf {
    let out_dir = dir.join("sweep_out");
    let config = format!(
        r#"
schema_version = 1
output_dir = "{}"
seeds = [0, 1]
tasks = ["link_prediction", "degree"]

[walk]
num_walks = 4
walk_length = 12
epochs = 1

[walk_grid]
num_walks = [2, 4]
walk_length = [10]
epochs = [1]

[forest]
n_trees = [20]
max_depths = [6]

[[dataset]]
name = "er-tiny"
family = "er"
n = 40
p = 0.15
seed = 3

[[method]]
name = "deepwalk"
dim = [8]
ns_exponent = [0.75]
subsample_freq = [0.0]
"#,
        out_dir.display()
    );
    let path = dir.join("sweep.toml");
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn sweep_reports_cross_product_executes_and_resumes() {
    let dir = tempdir().unwrap();
    let config = sweep_config(dir.path());

    // dry run announces the cross product and writes nothing
    let out = run(probe()
        .args(["sweep", "--dry-run", "--config"])
        .arg(&config));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("cross product: 2 runs"));
    assert!(!dir.path().join("sweep_out").exists());

    // the real run executes both and lands rows
    let out = run(probe()
        .args(["sweep", "--threads", "2", "--config"])
        .arg(&config));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let printed = stdout(&out);
    assert!(printed.contains("cross product: 2 runs"), "{printed}");
    assert!(printed.contains("executed 2 run(s), skipped 0"), "{printed}");
    let results = dir.path().join("sweep_out/results.csv");
    let text = fs::read_to_string(&results).unwrap();
    assert_eq!(text.lines().count(), 5, "header + 2 runs x 2 tasks");
    assert!(dir.path().join("sweep_out/dataset_stats.csv").exists());

    // a second invocation recomputes nothing
    let out = run(probe().args(["sweep", "--config"]).arg(&config));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("executed 0 run(s), skipped 2"));
    assert_eq!(fs::read_to_string(&results).unwrap(), text);
}

#[test]
fn sweep_worker_pool_is_capped_by_environment() {
    let dir = tempdir().unwrap();
    let config = sweep_config(dir.path());
    let out = run(probe()
        .env("GRL_PROBE_THREADS", "1")
        .args(["sweep", "--threads", "8", "--config"])
        .arg(&config));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(
        stdout(&out).contains("workers: 1"),
        "GRL_PROBE_THREADS must cap the pool: {}",
        stdout(&out)
    );
}

#[test]
fn sweep_pre_search_freezes_walk_winners() {
    let dir = tempdir().unwrap();
    let config = sweep_config(dir.path());
    let out = run(probe()
        .args(["sweep", "--pre-search", "--config"])
        .arg(&config));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("pre-search er-tiny x deepwalk:"));
    let winners: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("sweep_out/pre_search.json")).unwrap(),
    )
    .unwrap();
    let winner = &winners.as_array().unwrap()[0];
    assert_eq!(winner["dataset"], "er-tiny");
    assert_eq!(winner["method"], "deepwalk");
    assert_eq!(winner["walk_length"], 10, "winner comes from the grid");
}

#[test]
fn sweep_rejects_invalid_config_with_exit_1() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "schema_version = 99\noutput_dir = \"x\"\nseeds = [0]\n").unwrap();
    let out = run(probe().args(["sweep", "--config"]).arg(&path));
    assert_eq!(exit_code(&out), 1);

    let out = run(probe()
        .args(["sweep", "--config"])
        .arg(dir.path().join("nonexistent.toml")));
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn report_renders_tables_and_charts_from_sweep_output() {
    let dir = tempdir().unwrap();
    let config = sweep_config(dir.path());
    let out = run(probe().args(["sweep", "--config"]).arg(&config));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));

    let report_dir = dir.path().join("report");
    let out = run(probe()
        .args(["report", "--results"])
        .arg(dir.path().join("sweep_out/results.csv"))
        .arg("--out")
        .arg(&report_dir));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(report_dir.join("best.csv").exists());
    let svg = fs::read_to_string(report_dir.join("bars_link_prediction.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("class=\"bar\""));
    assert!(svg.contains("data-table"), "charts embed their data");

    // an empty results file is a config error
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = run(probe()
        .args(["report", "--results"])
        .arg(&empty)
        .arg("--out")
        .arg(dir.path().join("r2")));
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn verify_lemmas_passes_on_er_and_flags_bipartite_graphs() {
    let dir = tempdir().unwrap();
    let graph = generate_er(dir.path(), "g.edges", 40, 0.15, 3);
    let report = dir.path().join("lemmas.json");
    let out = run(probe()
        .args(["verify-lemmas", "--t-max", "10", "--graph"])
        .arg(&graph)
        .arg("--report")
        .arg(&report));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["all_pass"], true);
    assert_eq!(json["rng"], "chacha8");
    for lemma in ["degree_balance", "stationary_convergence", "spectral"] {
        assert_eq!(json["lemmas"][lemma]["pass"], true, "{lemma}");
    }

    // a path graph is bipartite: rows oscillate instead of converging
    let path_graph = dir.path().join("path.edges");
    fs::write(&path_graph, "0\t1\n1\t2\n2\t3\n").unwrap();
    let report2 = dir.path().join("lemmas2.json");
    let out = run(probe()
        .args(["verify-lemmas", "--t-max", "10", "--graph"])
        .arg(&path_graph)
        .arg("--report")
        .arg(&report2));
    assert_eq!(exit_code(&out), 2, "uncertified lemmas exit 2");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report2).unwrap()).unwrap();
    assert_eq!(json["all_pass"], false);
    assert_eq!(json["lemmas"]["stationary_convergence"]["pass"], false);
    assert!(json["lemmas"]["stationary_convergence"]["error"]
        .as_str()
        .unwrap()
        .contains("bipartite"));
}

#[test]
fn multiset_report_emits_rates_per_aggregator() {
    let dir = tempdir().unwrap();
    let graph = generate_er(dir.path(), "g.edges", 40, 0.15, 3);
    let report = dir.path().join("collisions.json");
    let out = run(probe()
        .args(["multiset-report", "--features", "degrees", "--graph"])
        .arg(&graph)
        .arg("--out")
        .arg(&report));
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for aggregator in ["mean", "max", "sum"] {
        let rate = json["collision_rates"][aggregator].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&rate), "{aggregator} rate {rate}");
    }

    // without --out the JSON goes to stdout
    let out = run(probe()
        .args(["multiset-report", "--features", "degree-onehot", "--graph"])
        .arg(&graph));
    assert_eq!(exit_code(&out), 0);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["features"], "degree-onehot");

    let out = run(probe()
        .args(["multiset-report", "--features", "bogus", "--graph"])
        .arg(&graph));
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn help_lists_every_subcommand() {
    let out = run(probe().arg("--help"));
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    for sub in [
        "generate",
        "properties",
        "embed",
        "evaluate",
        "sweep",
        "report",
        "verify-lemmas",
        "multiset-report",
    ] {
        assert!(text.contains(sub), "--help must mention {sub}");
    }
}
