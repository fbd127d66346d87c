use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spatialspill::esda::lm_diagnostics;
use spatialspill::ingest::{load_table, read_gal};
use spatialspill::{fit, fit_ols, ModelKind, ModelSpec, Normalization, WeightsMatrix};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spatialspill"))
        .current_dir(dir)
        .args(args)
        .env_remove("SPATIALSPILL_DATA")
        .env_remove("SPATIALSPILL_GEOMETRY")
        .env_remove("SPATIALSPILL_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// 10x10 rook lattice with an SDM response.
fn simulated(dir: &Path) {
    ok(
        dir,
        &[
            "simulate", "--lattice", "10x10", "--rule", "rook", "--model", "sdm", "--rho", "0.4", "--lambda", "0", "--beta", "1,2",
            "--theta", "0.5", "--sigma", "1", "--seed", "11", "--out", "data.csv,w.gal,lattice.geojson",
        ],
    );
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn row_w(dir: &Path) -> WeightsMatrix {
    let g = read_gal(dir.join("w.gal")).unwrap();
    WeightsMatrix::binary(&g, spatialspill::weights::Provenance::Graph).normalize(Normalization::Row).unwrap()
}

#[test]
fn sdm_pipeline_writes_fit_effects_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["fit", "--model", "sdm", "--data", "data.csv", "--y", "y", "--x", "x1,x2", "--durbin", "x1", "--weights", "w.gal", "--out", "fit.json"]);

    let fit_doc = read_json(&d.join("fit.json"));
    for key in [
        "spec", "region_ids", "beta_names", "beta", "theta_names", "theta", "rho", "lambda", "sigma2", "param_names", "params", "std_errors",
        "vcov", "loglik", "n", "k", "r2", "adj_r2", "r2_kind", "residuals", "fitted", "weights_fingerprint", "iterations", "warnings",
        "coefficients", "weights",
    ] {
        assert!(fit_doc.get(key).is_some(), "fit.json lacks `{key}`");
    }
    assert_eq!(fit_doc["spec"]["kind"], "sdm");
    assert_eq!(fit_doc["n"], 100);
    let w = row_w(d);
    assert_eq!(fit_doc["weights_fingerprint"], w.fingerprint());
    assert_eq!(fit_doc["weights"]["fingerprint"], w.fingerprint());

    // the CSV round-trip is lossless, so the library sees identical data
    let table = load_table(d.join("data.csv"), "region_id").unwrap();
    let spec = ModelSpec::new(ModelKind::Sdm, "y", &["x1", "x2"]).with_durbin(&["x1"]);
    let direct = fit(&spec, &table, Some(&w)).unwrap();
    let params: Vec<f64> = fit_doc["params"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(params, direct.params);

    ok(d, &["effects", "--fit", "fit.json", "--weights", "w.gal", "--draws", "100", "--seed", "5", "--out", "effects.csv"]);
    let text = std::fs::read_to_string(d.join("effects.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "panel,variable,estimate,mean,std_error,t_stat,p_value,stars");
    let panels: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(panels, ["direct", "direct", "indirect", "indirect", "total", "total", "spatial"]);

    for out in ["data.csv", "fit.json", "effects.csv"] {
        let m = read_json(&d.join(format!("{out}.manifest.json")));
        assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
        assert!(m["created_unix"].as_u64().is_some());
        for input in m["inputs"].as_array().unwrap() {
            let h = input["sha256"].as_str().unwrap();
            assert_eq!(h.len(), 64);
        }
    }
    let m = read_json(&d.join("effects.csv.manifest.json"));
    assert_eq!(m["seed"], 5);
    assert_eq!(m["options"]["effects"]["draws"], 100);
}

#[test]
fn unknown_flag_is_a_one_line_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["fit", "--model", "sdm", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("--bogus"), "{err}");
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["weights", "describe", "moran", "diagnose", "fit", "effects", "lisa", "simulate", "reproduce"] {
        assert!(String::from_utf8_lossy(&o.stdout).contains(sub));
    }
}

#[test]
fn corrupted_gal_names_the_unknown_id_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    let gal = std::fs::read_to_string(d.join("w.gal")).unwrap();
    // line 3 lists the neighbours of the first region
    let mut lines: Vec<String> = gal.lines().map(String::from).collect();
    assert!(lines[1].starts_with("r0c0 "));
    lines[2] = lines[2].replacen("r0c1", "ghost_17", 1);
    let corrupted = lines.join("\n") + "\n";
    assert_ne!(corrupted, gal);
    std::fs::write(d.join("bad.gal"), corrupted).unwrap();
    let o = run(d, &["moran", "--data", "data.csv", "--vars", "y", "--weights", "bad.gal", "--out", "moran.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("UnknownNeighborId") && err.contains("ghost_17"), "{err}");
    assert!(!d.join("moran.csv").exists());
    assert!(!d.join("moran.csv.manifest.json").exists());
}

#[test]
fn reproduce_without_data_reports_missing_external_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["reproduce", "--out", "rep"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("MissingExternalData"), "{}", stderr(&o));
    let o = run(dir.path(), &["reproduce", "--data", "absent.csv", "--geometry", "absent.geojson", "--out", "rep"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.csv"));
    assert!(!dir.path().join("rep").join("report.csv").exists());
}

#[test]
fn primary_outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["fit", "--model", "sdm", "--data", "data.csv", "--y", "y", "--x", "x1,x2", "--durbin", "x1", "--weights", "w.gal", "--out", "fit.json"]);
    let mut seen: Vec<Vec<Vec<u8>>> = Vec::new();
    for (k, threads) in ["1", "3", "1"].iter().enumerate() {
        let e = format!("e{k}.csv");
        let l = format!("l{k}.csv");
        let m = format!("m{k}.csv");
        ok(d, &["--threads", threads, "effects", "--fit", "fit.json", "--weights", "w.gal", "--draws", "64", "--out", &e]);
        ok(d, &["--threads", threads, "lisa", "--data", "data.csv", "--var", "y", "--weights", "w.gal", "--permutations", "99", "--out", &l]);
        ok(d, &["--threads", threads, "moran", "--data", "data.csv", "--vars", "y,x1", "--weights", "w.gal", "--permutations", "99", "--out", &m]);
        seen.push([e, l, m].iter().map(|p| std::fs::read(d.join(p)).unwrap()).collect());
    }
    assert_eq!(seen[0], seen[1]);
    assert_eq!(seen[0], seen[2]);
}

#[test]
fn weights_build_recovers_the_lattice_graph() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["weights", "build", "--geometry", "lattice.geojson", "--rule", "rook", "-o", "rook.gal"]);
    assert_eq!(std::fs::read(d.join("rook.gal")).unwrap(), std::fs::read(d.join("w.gal")).unwrap());

    ok(d, &["weights", "build", "--geometry", "lattice.geojson", "--rule", "queen", "--normalize", "row", "-o", "queen.wm"]);
    let q = spatialspill::weights::read_wm(d.join("queen.wm")).unwrap();
    assert_eq!(q.n(), 100);
    // 10x10 queen lattice: 2 * (9*10 + 9*10) + 2 * 2 * 9*9 directed links
    assert_eq!(q.nnz(), 2 * 180 + 4 * 81);
    assert!(q.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));

    ok(d, &["weights", "build", "--geometry", "lattice.geojson", "--rule", "invdist", "-o", "inv.wm"]);
    let inv = spatialspill::weights::read_wm(d.join("inv.wm")).unwrap();
    assert_eq!(inv.normalization(), Normalization::Spectral);
    assert!((inv.spectral_radius() - 1.0).abs() < 1e-9);

    let o = run(d, &["weights", "build", "--geometry", "lattice.geojson", "--rule", "invdist", "-o", "inv.gal"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.join("inv.gal").exists());

    ok(d, &["weights", "summary", "--weights", "w.gal", "-o", "summary.json", "--quiet"]);
    let s = read_json(&d.join("summary.json"));
    assert_eq!(s["summary"]["n"], 100);
    assert_eq!(s["summary"]["min_neighbors"], 2);
    assert_eq!(s["summary"]["max_neighbors"], 4);
}

#[test]
fn diagnose_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(d, &["diagnose", "--data", "data.csv", "--y", "y", "--x", "x1,x2", "--weights", "w.gal", "--out", "diag.csv", "-q"]);
    let table = load_table(d.join("data.csv"), "region_id").unwrap();
    let ols = fit_ols(&ModelSpec::new(ModelKind::Ols, "y", &["x1", "x2"]), &table, None).unwrap();
    let rep = lm_diagnostics(&ols, &row_w(d)).unwrap();
    let text = std::fs::read_to_string(d.join("diag.csv")).unwrap();
    let get = |test: &str| -> f64 {
        let line = text.lines().find(|l| l.split(',').nth(1) == Some(test)).unwrap();
        line.split(',').nth(2).unwrap().parse().unwrap()
    };
    assert_eq!(get("lm_error"), rep.lm_error.statistic);
    assert_eq!(get("robust_lm_lag"), rep.robust_lm_lag.statistic);
    assert_eq!(get("moran_i"), rep.moran_i);
}

#[test]
fn lisa_layer_and_describe_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    ok(
        d,
        &[
            "lisa", "--data", "data.csv", "--var", "y", "--weights", "w.gal", "--permutations", "99", "--out", "lisa.csv", "--geometry",
            "lattice.geojson", "--geojson", "lisa.geojson",
        ],
    );
    let layer = read_json(&d.join("lisa.geojson"));
    let features = layer["features"].as_array().unwrap();
    assert_eq!(features.len(), 100);
    for key in ["region_id", "local_i", "pseudo_p", "quadrant", "significant"] {
        assert!(features[0]["properties"].get(key).is_some(), "{key}");
    }

    ok(d, &["describe", "--data", "data.csv", "--vars", "y,x1,x2", "--out", "desc"]);
    let vars = std::fs::read_to_string(d.join("desc/variables.csv")).unwrap();
    assert_eq!(vars.lines().count(), 4);
    let corr = std::fs::read_to_string(d.join("desc/correlations.csv")).unwrap();
    assert_eq!(corr.lines().count(), 10);
    assert!(d.join("desc/manifest.json").exists());
}

#[test]
fn simulate_rejects_parameters_outside_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["simulate", "--lattice", "4x4", "--model", "sem", "--rho", "0.3", "--beta", "1", "--out", "a.csv,b.gal"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rho"));
    let o = run(dir.path(), &["simulate", "--lattice", "4by4", "--model", "sem", "--beta", "1", "--out", "a.csv,b.gal"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["simulate", "--lattice", "4x4", "--model", "sar", "--rho", "1.5", "--beta", "1", "--out", "a.csv,b.gal"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("OutOfStationaryRegion"));
    assert!(!dir.path().join("a.csv").exists());
}

/// Community-style table on the simulated lattice: the nine regressors of the
/// reproduce pipeline filled with smooth deterministic values.
fn community_table(dir: &Path) {
    let ids: Vec<String> = (0..10).flat_map(|r| (0..10).map(move |c| format!("r{r}c{c}"))).collect();
    let names = [
        "hh_income_log",
        "unemp_rate",
        "commute_min",
        "pop_density_log",
        "prop_religious",
        "permanent_5y",
        "prop_degree",
        "prop_foreign",
        "ls_sd",
    ];
    let mut out = String::from("region_id,life_satisfaction,");
    out.push_str(&names.join(","));
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        let v: Vec<f64> = (0..9).map(|j| 0.5 + 0.45 * ((i * (j + 3)) as f64 * 0.731 + j as f64).sin()).collect();
        let noise = 0.3 * ((i * 7) as f64 * 1.37).cos();
        let y = 7.5 + 0.1 * v[0] - 0.5 * v[8] + 0.2 * v[4] + noise;
        let cells: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
        out.push_str(&format!("{id},{y},{}\n", cells.join(",")));
    }
    std::fs::write(dir.join("community.csv"), out).unwrap();
}

#[test]
fn reproduce_runs_the_pipeline_and_joins_published_values() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    community_table(d);
    let west: String = (0..10).flat_map(|r| (0..5).map(move |c| format!("r{r}c{c}\n"))).collect();
    std::fs::write(d.join("west.txt"), west).unwrap();
    ok(
        d,
        &[
            "reproduce", "--data", "community.csv", "--geometry", "lattice.geojson", "--subsample", "west=west.txt", "--draws", "50", "--out",
            "rep", "-q",
        ],
    );
    let text = std::fs::read_to_string(d.join("rep/report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let find = |sample: &str, section: &str, weights: &str, model: &str, var: &str, q: &str| {
        rows.iter()
            .find(|r| r[0] == sample && r[1] == section && r[2] == weights && r[3] == model && r[4] == var && r[5] == q)
            .cloned()
    };
    let adj = find("full", "ols", "none", "ols", "", "adj_r2").unwrap();
    assert_eq!(adj[7].parse::<f64>().unwrap(), 0.611);
    let dev: f64 = adj[8].parse().unwrap();
    assert!((dev - (adj[6].parse::<f64>().unwrap() - 0.611).abs()).abs() < 1e-15);
    let rho = find("full", "spatial", "rook1", "sdm", "rho", "estimate").unwrap();
    assert_eq!(rho[7].parse::<f64>().unwrap(), 0.162);
    assert!(find("full", "lm", "queen2", "ols", "lm_error", "statistic").is_some());
    let n = find("west", "ols", "none", "ols", "", "n").unwrap();
    assert_eq!(n[6].parse::<f64>().unwrap(), 50.0);
    assert_eq!(n[7], "");
    assert!(d.join("rep/fits/full_rook1_gns.json").exists());
    assert!(d.join("rep/manifest.json").exists());
}
