//! End-to-end checks of the experiment runners and the `jqc` binary:
//! config parsing, output schema, reproducibility, and the counts
//! import/export path.

use std::path::PathBuf;
use std::process::Command;

use jqc::experiments::{
    parse_config, run_cli_command, ResultRecord, RunOptions, CSV_HEADER,
};

fn temp_path(name: &str) -> PathBuf {
    let dir = tempfile::tempdir().expect("tempdir");
    // Leak the dir so the path survives the helper; the OS cleans /tmp.
    let path = dir.path().join(name);
    std::mem::forget(dir);
    path
}

fn quick_optimizer() -> serde_json::Value {
    serde_json::json!({
        "stage1_max_evals": 600,
        "stage2_max_iters": 60,
        "restarts": 2,
    })
}

fn read_rows(path: &PathBuf) -> Vec<String> {
    std::fs::read_to_string(path)
        .expect("result file")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn dump_h_examples() {
    let out = temp_path("ising.txt");
    let config = serde_json::json!({
        "kind": "dump-h",
        "model": {"kind": "ising", "sites": 2, "gamma": 1.0},
        "out": out,
    })
    .to_string();
    run_cli_command("dump-h", &config, &RunOptions::default()).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);

    // Deterministic across runs.
    let again = temp_path("ising2.txt");
    let config2 = serde_json::json!({
        "kind": "dump-h",
        "model": {"kind": "ising", "sites": 2, "gamma": 1.0},
        "out": again,
    })
    .to_string();
    run_cli_command("dump-h", &config2, &RunOptions::default()).unwrap();
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());

    // The fermionic ladder at L=2: one line per distinct Pauli string,
    // identity coefficient U*L/4 = 2.
    let hub = temp_path("hubbard.txt");
    let config = serde_json::json!({
        "kind": "dump-h",
        "model": {"kind": "hubbard", "sites": 2, "hopping": 1.0, "repulsion": 4.0},
        "out": hub,
    })
    .to_string();
    run_cli_command("dump-h", &config, &RunOptions::default()).unwrap();
    let text = std::fs::read_to_string(&hub).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().any(|l| l == "2 0 IIII"));
}

#[test]
fn sweep_rows_schema_and_improvement() {
    let out = temp_path("sweep.csv");
    let config = serde_json::json!({
        "kind": "sweep",
        "model": {"kind": "ising", "sites": 4, "gamma": 0.0},
        "grid": [0.5, 1.0],
        "depths": [1],
        "optimizer": quick_optimizer(),
        "seed": 7,
        "out": out,
    })
    .to_string();
    let summary = run_cli_command("sweep", &config, &RunOptions::default()).unwrap();
    assert_eq!(summary.records.len(), 2);

    let rows = read_rows(&out);
    assert_eq!(rows[0], CSV_HEADER);
    for row in &rows[1..] {
        let record = ResultRecord::parse_csv_row(row).unwrap();
        assert_eq!(record.kind, "sweep");
        // The projected ansatz never loses to the bare circuit.
        assert!(record.rel_err_jqc.unwrap() <= record.rel_err_c.unwrap() + 1e-12);
        assert!(record.e_jqc.unwrap() >= record.e_exact.unwrap() - 1e-9);
    }
}

#[test]
fn sweep_reproducible_excluding_wall_time() {
    let config_body = serde_json::json!({
        "kind": "sweep",
        "model": {"kind": "heisenberg", "sites": 3, "coupling": 0.0},
        "grid": [0.5],
        "depths": [1],
        "optimizer": quick_optimizer(),
        "seed": 11,
    })
    .to_string();
    let out_a = temp_path("a.csv");
    let out_b = temp_path("b.csv");
    let opts_a = RunOptions {
        out_override: Some(out_a.clone()),
        ..RunOptions::default()
    };
    let opts_b = RunOptions {
        out_override: Some(out_b.clone()),
        threads: Some(2),
        ..RunOptions::default()
    };
    run_cli_command("sweep", &config_body, &opts_a).unwrap();
    run_cli_command("sweep", &config_body, &opts_b).unwrap();

    let strip_wall = |path: &PathBuf| {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| {
                if l.starts_with('#') || l == CSV_HEADER {
                    l.to_string()
                } else {
                    l.rsplit_once(',').unwrap().0.to_string()
                }
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip_wall(&out_a), strip_wall(&out_b));
}

#[test]
fn gain_truncated_mode_records_order() {
    let out = temp_path("gain.csv");
    let config = serde_json::json!({
        "kind": "gain",
        "model": {"kind": "ising", "sites": 0, "gamma": 1.0},
        "sizes": [3],
        "depths": [1, 2],
        "mode": {"truncated": {"order": 1}},
        "optimizer": quick_optimizer(),
        "seed": 3,
        "out": out,
    })
    .to_string();
    let summary = run_cli_command("gain", &config, &RunOptions::default()).unwrap();
    assert_eq!(summary.records.len(), 2);
    for r in &summary.records {
        assert_eq!(r.order, Some(1));
        assert!(r.gain.unwrap() >= 1.0 - 1e-9);
    }
}

#[test]
fn lambda_scan_zero_point_matches_circuit() {
    let out = temp_path("scan.csv");
    let lambda_opt = 0.5 * ((1.0 + 5.0f64.sqrt()) / 2.0).ln();
    let config = serde_json::json!({
        "kind": "lambda-scan",
        "model": {"kind": "ising", "sites": 2, "gamma": 1.0},
        "circuit": {"type": "hadamard_wall"},
        "lambda_opt": [lambda_opt],
        "scan": [0.0, 1.0],
        "shots": [4096],
        "m_rep": 4,
        "seed": 5,
        "out": out,
    })
    .to_string();
    let summary = run_cli_command("lambda-scan", &config, &RunOptions::default()).unwrap();
    assert_eq!(summary.records.len(), 2);

    let zero = &summary.records[0];
    assert_eq!(zero.value, 0.0);
    // At λ=0 both paths reduce to the bare circuit energy (-2 for |++>).
    assert!((zero.e_jqc.unwrap() - zero.e_c.unwrap()).abs() < 1e-12);
    assert!((zero.e_sampled.unwrap() + 2.0).abs() < 4.0 * zero.stderr.unwrap().max(1e-3));

    let full = &summary.records[1];
    assert_eq!(full.value, 1.0);
    assert!((full.e_jqc.unwrap() + 5.0f64.sqrt()).abs() < 1e-10);
}

#[test]
fn lambda_scan_import_round_trip() {
    let counts_dir = temp_path("counts");
    let lambda_opt = 0.5 * ((1.0 + 5.0f64.sqrt()) / 2.0).ln();
    let base = serde_json::json!({
        "kind": "lambda-scan",
        "model": {"kind": "ising", "sites": 2, "gamma": 1.0},
        "circuit": {"type": "hadamard_wall"},
        "lambda_opt": [lambda_opt],
        "scan": [0.0, 0.5, 1.0],
        "shots": [2048],
        "m_rep": 2,
        "seed": 17,
    });

    // Export pass.
    let out_a = temp_path("scan_export.csv");
    let mut cfg = base.clone();
    cfg["export_counts_dir"] = serde_json::json!(counts_dir);
    cfg["out"] = serde_json::json!(out_a);
    let direct = run_cli_command("lambda-scan", &cfg.to_string(), &RunOptions::default()).unwrap();

    // Import pass over the exported files.
    let files: Vec<Vec<PathBuf>> = (0..2)
        .map(|rep| {
            ["XX", "ZZ"]
                .iter()
                .map(|b| counts_dir.join(format!("counts_s2048_rep{rep}_{b}.txt")))
                .collect()
        })
        .collect();
    let out_b = temp_path("scan_import.csv");
    let mut cfg = base.clone();
    cfg["import"] = serde_json::json!({ "repetitions": files });
    cfg["out"] = serde_json::json!(out_b);
    let imported = run_cli_command("lambda-scan", &cfg.to_string(), &RunOptions::default()).unwrap();

    assert_eq!(direct.records.len(), imported.records.len());
    for (d, i) in direct.records.iter().zip(&imported.records) {
        assert!(
            (d.e_sampled.unwrap() - i.e_sampled.unwrap()).abs() < 1e-12,
            "λ multiplier {}",
            d.value
        );
        assert!((d.stderr.unwrap() - i.stderr.unwrap()).abs() < 1e-12);
    }
}

#[test]
fn reconstruct_rows_are_ordered_variationally() {
    let out = temp_path("rec.csv");
    let config = serde_json::json!({
        "kind": "reconstruct",
        "model": {"kind": "ising", "sites": 0, "gamma": 1.0},
        "sizes": [3, 4],
        "states_per_size": 2,
        "shots": [0],
        "optimizer": {"stage1_max_evals": 400, "stage2_max_iters": 40, "restarts": 1},
        "seed": 23,
        "out": out,
    })
    .to_string();
    let summary = run_cli_command("reconstruct", &config, &RunOptions::default()).unwrap();
    assert_eq!(summary.records.len(), 4);
    for r in &summary.records {
        let e_exact = r.e_exact.unwrap();
        let e_direct = r.e_c.unwrap();
        let e_rec = r.e_sampled.unwrap();
        let e_jas = r.e_jqc.unwrap();
        assert!(e_jas <= e_rec + 1e-9, "refinement increased the energy");
        assert!(e_jas >= e_exact - 1e-9);
        assert!(e_direct >= e_exact - 1e-9);
        assert!(r.eps_b.unwrap() < 0.1);
    }
}

#[test]
fn dispersion_budget_split() {
    let out = temp_path("disp.csv");
    let lambda_opt = 0.5 * ((1.0 + 5.0f64.sqrt()) / 2.0).ln();
    let config = serde_json::json!({
        "kind": "dispersion",
        "model": {"kind": "ising", "sites": 2, "gamma": 1.0},
        "circuit": {"type": "hadamard_wall"},
        "lambda_opt": [lambda_opt],
        "scan": [0.0, 1.0],
        "total_measurements": 32000,
        "m_rep": 4,
        "seed": 2,
        "out": out,
    })
    .to_string();
    let summary = run_cli_command("dispersion", &config, &RunOptions::default()).unwrap();
    assert_eq!(summary.records.len(), 2);
    // 32000 system-register reads / (2 registers * 2 bases) = 8000 per basis.
    assert_eq!(summary.records[0].shots, Some(8000));
    for r in &summary.records {
        assert!(r.stderr.unwrap().is_finite());
    }
}

#[test]
fn config_validation_errors() {
    // Kind mismatch.
    let config = serde_json::json!({
        "kind": "sweep",
        "model": {"kind": "ising", "sites": 4, "gamma": 1.0},
        "grid": [1.0],
        "depths": [1],
    })
    .to_string();
    let err = run_cli_command("gain", &config, &RunOptions::default()).unwrap_err();
    assert!(err.to_string().contains("does not match"));

    // Empty grid.
    let config = serde_json::json!({
        "kind": "sweep",
        "model": {"kind": "ising", "sites": 4, "gamma": 1.0},
        "grid": [],
        "depths": [1],
    })
    .to_string();
    let err = run_cli_command("sweep", &config, &RunOptions::default()).unwrap_err();
    assert!(err.to_string().contains("grid"));

    // Malformed JSON keeps line/column information.
    let err = parse_config("{\n  \"kind\": \"sweep\",\n  bad\n}").unwrap_err();
    assert!(err.to_string().contains("line 3"));
}

#[test]
fn cross_command_exact_energy_consistent() {
    let model = serde_json::json!({"kind": "ising", "sites": 3, "gamma": 0.7});
    let sweep_cfg = serde_json::json!({
        "kind": "sweep",
        "model": model,
        "grid": [0.7],
        "depths": [1],
        "optimizer": quick_optimizer(),
        "out": temp_path("x.csv"),
    })
    .to_string();
    let scan_cfg = serde_json::json!({
        "kind": "lambda-scan",
        "model": model,
        "circuit": {"type": "hadamard_wall"},
        "lambda_opt": [0.1, 0.1],
        "scan": [1.0],
        "shots": [128],
        "m_rep": 1,
        "out": temp_path("y.csv"),
    })
    .to_string();
    let a = run_cli_command("sweep", &sweep_cfg, &RunOptions::default()).unwrap();
    let b = run_cli_command("lambda-scan", &scan_cfg, &RunOptions::default()).unwrap();
    let ea = a.records[0].e_exact.unwrap();
    let eb = b.records[0].e_exact.unwrap();
    assert!((ea - eb).abs() < 1e-12);
}

#[test]
fn binary_end_to_end() {
    let out = temp_path("bin_sweep.csv");
    let config_path = temp_path("cfg.json");
    let config = serde_json::json!({
        "kind": "sweep",
        "model": {"kind": "ising", "sites": 3, "gamma": 0.0},
        "grid": [0.5],
        "depths": [1],
        "optimizer": quick_optimizer(),
        "seed": 1,
    })
    .to_string();
    std::fs::write(&config_path, &config).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_jqc"))
        .args([
            "sweep",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            "1",
        ])
        .status()
        .expect("binary runs");
    assert!(status.success());
    let rows = read_rows(&out);
    assert_eq!(rows[0], CSV_HEADER);
    assert_eq!(rows.len(), 2);
}
