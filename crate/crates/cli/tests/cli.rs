mod common;

use std::fs;

use common::*;
use tempfile::tempdir;

const FAST: [&str; 6] = ["--lilliefors-reps", "200", "--bootstrap", "200", "--permutations", "200"];

fn stats(table: &std::path::Path, out: &std::path::Path, extra: &[&str]) -> std::process::Output {
    let mut args = vec!["stats", "--table", table.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    morphkit(&args)
}

#[test]
fn summary_has_the_descriptive_block_per_group() {
    let dir = tempdir().unwrap();
    let table = dir.path().join("t.csv");
    write_table(&synthetic_table(1), &table);
    let out = dir.path().join("r.json");
    let o = stats(&table, &out, &[&["--analysis", "summary", "--seed", "3"][..], &FAST].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out);
    assert_eq!(r["report_version"], 1);
    assert_eq!(r["config"]["request"]["seed"], 3);
    let s = &r["results"]["summary"];
    assert_eq!(s["groups"]["CDR0"], 26);
    assert_eq!(s["groups"]["CDR0.5"], 18);
    let vars = s["variables"].as_array().unwrap();
    let hv = vars.iter().find(|v| v["variable"] == "hv_lb").expect("left baseline volume row");
    for g in ["CDR0", "CDR0.5", "overall"] {
        for k in ["n", "mean", "sd", "min", "q1", "median", "q3", "max"] {
            assert!(!hv[g][k].is_null(), "{g}.{k}");
        }
        let b = &hv[g];
        let order = ["min", "q1", "median", "q3", "max"].map(|k| b[k].as_f64().unwrap());
        assert!(order.windows(2).all(|w| w[0] <= w[1]));
    }
    assert_eq!(hv["CDR0"]["n"], 26);
}

#[test]
fn apc_of_a_hand_row() {
    let dir = tempdir().unwrap();
    let mut t = synthetic_table(2);
    let r = &mut t.records[0];
    r.scan_interval_years = 2.0;
    r.hippo_volume.0[0] = 2000.0;
    r.hippo_volume.0[1] = 1800.0;
    r.metric_distance.0[0] = 3.0;
    r.metric_distance.0[1] = 3.6;
    let table = dir.path().join("t.csv");
    write_table(&t, &table);
    let out = dir.path().join("r.json");
    let o = stats(&table, &out, &["--analysis", "apc", "--max-power", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let recs = read_json(&out)["results"]["apc"]["records"].clone();
    assert_eq!(recs[0]["subject_id"], "s00");
    assert_eq!(recs[0]["side"], "L");
    assert_eq!(recs[0]["v_apc"].as_f64(), Some(5.0));
    // 3.6 has no exact binary form.
    assert!((recs[0]["d_apc"].as_f64().unwrap() - 10.0).abs() < 1e-12);
}

#[test]
fn numbers_are_printed_with_17_significant_digits() {
    let dir = tempdir().unwrap();
    let table = dir.path().join("t.csv");
    write_table(&synthetic_table(4), &table);
    let out = dir.path().join("r.json");
    let o = stats(&table, &out, &["--analysis", "pca"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let first = text.split("\"eigenvalues\":[").nth(1).unwrap().split([',', ']']).next().unwrap();
    let mantissa = first.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{first}");
}

#[test]
fn randomized_analyses_need_a_seed() {
    let dir = tempdir().unwrap();
    let table = dir.path().join("t.csv");
    write_table(&synthetic_table(1), &table);
    let out = dir.path().join("r.json");
    let o = stats(&table, &out, &["--analysis", "cdf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"), "{}", stderr(&o));
    assert!(!out.exists());

    let o = std::process::Command::new(env!("CARGO_BIN_EXE_morphkit"))
        .args(["stats", "--table", table.to_str().unwrap(), "--out", out.to_str().unwrap(), "--analysis", "cdf"])
        .args(FAST)
        .env("MORPHKIT_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(&out)["config"]["request"]["seed"], 11);
}

#[test]
fn plot_series_are_written() {
    let dir = tempdir().unwrap();
    let table = dir.path().join("t.csv");
    write_table(&synthetic_table(5), &table);
    let out = dir.path().join("r.json");
    let plots = dir.path().join("plots");
    let o = stats(&table, &out, &[&["--analysis", "cdf", "--analysis", "repeated", "--measure", "distance", "--seed", "1", "--plots", plots.to_str().unwrap()][..], &FAST].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let ecdf = fs::read_to_string(plots.join("ecdf_distance.csv")).unwrap();
    assert!(ecdf.starts_with("cell,group,x,F\n"));
    // Each cell and group ends at F = 1.
    assert_eq!(ecdf.lines().filter(|l| l.ends_with(",1.0000000000000000e0")).count(), 8);
    let means = fs::read_to_string(plots.join("interaction_distance.csv")).unwrap();
    assert_eq!(means.lines().count(), 1 + 8);
}

#[test]
fn a_failing_analysis_leaves_no_report() {
    let dir = tempdir().unwrap();
    let mut t = synthetic_table(6);
    t.records[3].metric_distance.0[2] = 0.0;
    let table = dir.path().join("t.csv");
    write_table(&t, &table);
    let out = dir.path().join("r.json");
    let o = stats(&table, &out, &["--analysis", "pca", "--analysis", "apc"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("s03"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn schema_errors_name_the_column_or_row() {
    let dir = tempdir().unwrap();
    let table = dir.path().join("t.csv");
    write_table(&synthetic_table(1), &table);
    let text = fs::read_to_string(&table).unwrap();
    let out = dir.path().join("r.json");

    fs::write(&table, text.replacen("icv_follow", "icv_later", 1)).unwrap();
    let o = stats(&table, &out, &["--analysis", "pca"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("icv_follow"), "{}", stderr(&o));

    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].replacen("CDR0", "CDR9", 1);
    fs::write(&table, lines.join("\n")).unwrap();
    let o = stats(&table, &out, &["--analysis", "pca"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 3"), "{}", stderr(&o));

    let o = morphkit(&["validate", "--table", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn validate_reports_counts() {
    let dir = tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let mut t = synthetic_table(1);
    write_table(&t, &table);
    let mut text = fs::read_to_string(&table).unwrap();
    t.records.truncate(1);
    text.push_str("x99,CDR0,F,70,12,2,1,1,1,1,1,1,1,1,,1,1,1\n");
    fs::write(&table, text).unwrap();
    let vol = save(&ball(8, [4.0; 3], 2.0), dir.path(), "b.mvol");
    let o = morphkit(&["validate", "--table", table.to_str().unwrap(), "--volume", vol.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.contains("44 subjects (26 CDR0, 18 CDR0.5), 1 rejected"), "{s}");
    assert!(s.contains("8x8x8"), "{s}");
}

#[test]
fn corrupt_magic_is_a_format_error_naming_the_offset() {
    let dir = tempdir().unwrap();
    let good = save(&ball(8, [4.0; 3], 2.0), dir.path(), "good.mvol");
    let bad = dir.path().join("bad.mvol");
    let mut bytes = fs::read(&good).unwrap();
    bytes[2] = b'X';
    fs::write(&bad, bytes).unwrap();
    let out = dir.path().join("r.json");
    let o = morphkit(&["register", "--template", bad.to_str().unwrap(), "--target", good.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("offset 2"), "{msg}");
    assert!(msg.contains("bad.mvol"), "{msg}");
    assert!(!out.exists());
}

#[test]
fn grid_mismatch_is_rejected() {
    let dir = tempdir().unwrap();
    let a = save(&ball(8, [4.0; 3], 2.0), dir.path(), "a.mvol");
    let b = save(&ball(10, [5.0; 3], 2.0), dir.path(), "b.mvol");
    let out = dir.path().join("r.json");
    let o = morphkit(&["distance", "--template", a.to_str().unwrap(), "--target", b.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));
}

#[test]
fn self_registration_has_zero_distance() {
    let dir = tempdir().unwrap();
    let a = save(&ball(16, [8.0; 3], 4.0), dir.path(), "a.mvol");
    let out = dir.path().join("r.json");
    let warped = dir.path().join("w.mvol");
    let o = morphkit(&[
        "register",
        "--template",
        a.to_str().unwrap(),
        "--target",
        a.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--warped",
        warped.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out);
    assert!(r["metric_distance"].as_f64().unwrap() <= 1e-6);
    assert_eq!(r["command"], "register");
    assert!(r["energy_trace"].is_array());
    assert!(warped.exists());
}

#[test]
fn manifest_batch_is_deterministic() {
    let dir = tempdir().unwrap();
    let n = 12;
    let names: Vec<String> = (0..4)
        .map(|k| {
            let c = 6.0 + 0.5 * k as f64;
            save(&ball(n, [c, 6.0, 6.0], 3.0), dir.path(), &format!("v{k}.mvol"));
            format!("v{k}.mvol")
        })
        .collect();
    save(&ball(n, [6.0; 3], 3.0), dir.path(), "template.mvol");
    let mut manifest = String::from("template,target,out\n");
    for (k, name) in names.iter().enumerate() {
        manifest.push_str(&format!("template.mvol,{name},out/r{k}.json\n"));
    }
    let m = dir.path().join("jobs.csv");
    fs::write(&m, manifest).unwrap();
    let run = || {
        let o = morphkit(&["distance", "--manifest", m.to_str().unwrap(), "--jobs", "3", "--max-iters", "15"]);
        assert!(o.status.success(), "{}", stderr(&o));
        (0..4).map(|k| fs::read(dir.path().join(format!("out/r{k}.json"))).unwrap()).collect::<Vec<_>>()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let d: Vec<f64> = first.iter().map(|b| serde_json::from_slice::<serde_json::Value>(b).unwrap()["metric_distance"].as_f64().unwrap()).collect();
    assert!(d[0] <= 1e-6);
    assert!(d.windows(2).all(|w| w[0] < w[1]), "{d:?}");
}

#[test]
fn full_report_is_byte_identical_across_runs() {
    let dir = tempdir().unwrap();
    let table = dir.path().join("t.csv");
    write_table(&synthetic_table(7), &table);
    let run = |tag: &str| {
        let out = dir.path().join(format!("{tag}.json"));
        let plots = dir.path().join(tag);
        let o = stats(&table, &out, &[&["--analysis", "full", "--seed", "7", "--max-power", "3", "--plots", plots.to_str().unwrap()][..], &FAST].concat());
        assert!(o.status.success(), "{}", stderr(&o));
        let mut files = vec![fs::read(&out).unwrap()];
        let mut names: Vec<_> = fs::read_dir(&plots).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        files.extend(names.iter().map(|p| fs::read(p).unwrap()));
        files
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a.len(), 5);
    assert_eq!(a, b);
    let r: serde_json::Value = serde_json::from_slice(&a[0]).unwrap();
    for key in ["summary", "repeated", "posthoc", "correlations", "cdf", "pca", "logistic", "apc"] {
        assert!(r["results"][key].is_object(), "{key}");
    }
}
