use std::path::Path;
use std::process::{Command, Output};

use cascadelab::netcore;

fn cascadelab(args: &[&str]) -> Output {
    cascadelab_env(args, &[])
}

fn cascadelab_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cascadelab"));
    cmd.args(args).env_remove("CASCADELAB_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Row {
    tau: f64,
    mean: f64,
    half_width: f64,
    replications: u64,
}

fn rows(csv_text: &str) -> Vec<Row> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let header = reader.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        ["tau", "mean_extent", "ci_half_width", "replications", "model", "network", "seed"]
    );
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            Row {
                tau: r[0].parse().unwrap(),
                mean: r[1].parse().unwrap(),
                half_width: r[2].parse().unwrap(),
                replications: r[3].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn fleesir_diamond_sweep_is_discordant() {
    let out = cascadelab(&[
        "sweep", "--model", "fleesir", "--network", "diamond", "--seed-node", "a", "--tau-grid", "0:1:0.05", "--reps",
        "20000", "--mode", "mc",
    ]);
    let rows = rows(&stdout(&out));
    assert_eq!(rows.len(), 21);
    let last = rows.last().unwrap();
    assert_eq!(last.tau, 1.0);
    let peak = rows.iter().max_by(|a, b| a.mean.total_cmp(&b.mean)).unwrap();
    assert!(peak.tau < 1.0);
    assert!(peak.mean - peak.half_width > last.mean + last.half_width, "{} vs {}", peak.mean, last.mean);
}

#[test]
fn sir_diamond_sweep_is_non_decreasing_within_ci() {
    let out = cascadelab(&[
        "sweep", "--model", "sir", "--network", "diamond", "--seed-node", "a", "--tau-grid", "0:1:0.1", "--reps",
        "20000", "--mode", "mc",
    ]);
    let rows = rows(&stdout(&out));
    for w in rows.windows(2) {
        assert!(w[1].mean + w[1].half_width + w[0].half_width >= w[0].mean, "drop at tau={}", w[1].tau);
    }
    assert_eq!(rows.last().unwrap().mean, 6.0);
}

#[test]
fn exact_sweep_reports_zero_replications() {
    let out = cascadelab(&["sweep", "--model", "fleesir", "--network", "diamond", "--seed-node", "a", "--tau-grid", "0.8:1:0.2", "--mode", "exact"]);
    let rows = rows(&stdout(&out));
    assert_eq!((rows[0].mean, rows[0].half_width, rows[0].replications), (3.368, 0.0, 0));
    assert_eq!(rows[1].mean, 3.0);
}

#[test]
fn complete_graph_sweep_follows_linear_law() {
    let out = cascadelab(&[
        "sweep", "--model", "fleesir", "--network", "complete:100", "--single-seed-uniform", "--tau-grid", "0.1:0.5:0.2",
        "--reps", "5000", "--seed", "4",
    ]);
    let rows = rows(&stdout(&out));
    assert_eq!(rows.len(), 3);
    for row in rows {
        let expected = 1.0 + row.tau * 99.0;
        assert!((row.mean - expected).abs() <= row.half_width, "tau={} mean={} expected={expected}", row.tau, row.mean);
    }
}

#[test]
fn sweep_output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = |path: &Path| {
        vec![
            "sweep".to_owned(),
            "--network".into(),
            "karate".into(),
            "--model".into(),
            "fleesir".into(),
            "--single-seed-uniform".into(),
            "--tau-grid".into(),
            "0:1:0.25".into(),
            "--reps".into(),
            "3000".into(),
            "--seed".into(),
            "11".into(),
            "--output".into(),
            path.to_str().unwrap().to_owned(),
        ]
    };
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let path = dir.path().join(format!("run{i}.csv"));
        let a = args(&path);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        let out = cascadelab_env(&refs, &[("CASCADELAB_THREADS", threads)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    assert_eq!(rows(std::str::from_utf8(&outputs[0]).unwrap()).len(), 5);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# sweep recipe\nmodel = fleesir\nnetwork = diamond\nseed_node = a\ntau-grid = 0.5:1:0.5\nreps = 200\nmode = mc\n").unwrap();
    let from_file = rows(&stdout(&cascadelab(&["sweep", "--config", cfg.to_str().unwrap()])));
    assert_eq!(from_file.len(), 2);
    assert!(from_file.iter().all(|r| r.replications == 200));

    let overridden = rows(&stdout(&cascadelab(&["sweep", "--config", cfg.to_str().unwrap(), "--reps", "300"])));
    assert!(overridden.iter().all(|r| r.replications == 300));

    std::fs::write(&cfg, "replications = 5\n").unwrap();
    let out = cascadelab(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let cases: &[&[&str]] = &[
        &["sweep", "--tau-grid", "1:0:0.1"],
        &["sweep", "--network", "no/such/file.edgelist"],
        &["sweep", "--seed-node", "zz"],
        &["sweep", "--tau-grid", "0:1:0.5", "--output", "/no/such/dir/out.csv"],
        &["sweep", "--model", "seir"],
        &["verify", "unknown-suite"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = cascadelab(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = cascadelab_env(&["dataset", "diamond"], &[("CASCADELAB_THREADS", "0")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_suites_report_one_line_per_check() {
    let out = cascadelab(&["verify", "theorem1", "--samples", "100", "--seed", "7"]);
    let text = stdout(&out);
    assert_eq!(text.trim(), "check=theorem1.dominated-pairs status=pass instances=100 violations=0");

    let text = stdout(&cascadelab(&["verify", "fleesir-complete-graph"]));
    assert!(text.lines().all(|l| l.starts_with("check=fleesir-complete-graph.") && l.contains("status=pass")));
    assert!(text.contains("max_abs_error=0e0"));

    let text = stdout(&cascadelab(&["verify", "percolation-equivalence", "--samples", "1"]));
    assert!(text.contains("status=pass graphs=287"));

    for suite in ["lemma1", "reductions"] {
        let text = stdout(&cascadelab(&["verify", suite, "--samples", "10", "--seed", "3"]));
        assert!(text.lines().all(|l| l.contains("status=pass")), "{text}");
    }
}

#[test]
fn failing_check_exits_with_one() {
    // A single replication has a zero-width interval at an integer extent,
    // which cannot contain 1 + 99 tau.
    let out = cascadelab(&["verify", "fleesir-complete-graph", "--samples", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("status=fail"));
}

#[test]
fn reduce_tau_to_gamma_writes_helper_with_removal() {
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("one.edgelist");
    let params_path = dir.path().join("one.params");
    std::fs::write(&net_path, "u v 0.3\n").unwrap();
    std::fs::write(&params_path, "u 1 0\nv 0 0.5\n").unwrap();
    let out_path = dir.path().join("reduced.edgelist");
    let out = cascadelab(&[
        "reduce",
        "tau_to_gamma",
        "--network",
        net_path.to_str().unwrap(),
        "--directed",
        "--params",
        params_path.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(stdout(&out).contains("helpers=1"));

    let (net, mut params) = netcore::build_from_edge_list(&std::fs::read_to_string(&out_path).unwrap(), true).unwrap();
    let params_text = std::fs::read_to_string(dir.path().join("reduced.edgelist.params")).unwrap();
    netcore::apply_params_file(&params_text, &net, &mut params).unwrap();
    assert_eq!(net.node_count(), 3);
    assert_eq!(net.arc_count(), 2);
    assert!(params.transmission.iter().all(|&t| t == 1.0));
    let helper = net.node("h:u→v").expect("helper node");
    assert!((params.removal[helper] - 0.7).abs() < 1e-15);
    assert!(params_text.lines().any(|l| l.starts_with("h:u→v 0 ")));
}

#[test]
fn reduce_sigma_to_alpha_on_unseeded_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("alpha.edgelist");
    let params_out = dir.path().join("alpha.txt");
    let out = cascadelab(&[
        "reduce",
        "sigma-to-alpha",
        "--network",
        "diamond",
        "--output",
        out_path.to_str().unwrap(),
        "--params-output",
        params_out.to_str().unwrap(),
    ]);
    assert!(stdout(&out).contains("alpha=alpha"));
    let (net, mut params) = netcore::build_from_edge_list(&std::fs::read_to_string(&out_path).unwrap(), true).unwrap();
    netcore::apply_params_file(&std::fs::read_to_string(&params_out).unwrap(), &net, &mut params).unwrap();
    let alpha = net.node("alpha").unwrap();
    assert_eq!(params.induction[alpha], 1.0);
    assert_eq!(net.out_arcs(alpha).len(), 6);
    assert!(net.out_arcs(alpha).iter().all(|&a| params.transmission[a] == 0.0));
}

#[test]
fn dataset_round_trips_through_edge_list_parser() {
    let text = stdout(&cascadelab(&["dataset", "karate"]));
    let (net, _) = netcore::build_from_edge_list(&text, true).unwrap();
    assert_eq!(net, netcore::load_karate().unwrap());
}

#[test]
fn simulate_prints_trajectory_and_extent() {
    let text = stdout(&cascadelab(&[
        "simulate", "--network", "diamond", "--seed-node", "a", "--model", "fleesir", "--tau", "1",
    ]));
    assert!(text.starts_with("0: S=b,c,d,e,f I=a R= D="));
    assert!(text.ends_with("extent=3 final_time=2\n"));
}
