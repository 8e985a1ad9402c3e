use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn hsa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsa"))
        .args(args)
        .current_dir(dir)
        .env_remove("HSA_SEED")
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn hsa")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = hsa(dir, args);
    assert!(out.status.success(), "hsa {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

/// synth + build into `s/` and `b/`.
fn built(seed: &str) -> TempDir {
    let t = TempDir::new().unwrap();
    ok(
        t.path(),
        &[
            "synth",
            "--communities",
            "3",
            "--size",
            "8",
            "--internal",
            "20",
            "--external",
            "1",
            "--seed",
            seed,
            "-o",
            "s",
        ],
    );
    ok(
        t.path(),
        &[
            "build",
            "--discharges",
            "s/discharges.csv",
            "--crosswalk",
            "s/crosswalk.csv",
            "--type",
            "ED Only",
            "--year",
            "2018",
            "-o",
            "b",
        ],
    );
    t
}

fn two_triangles(dir: &Path) {
    let flows = "patient_zcta,facility_zcta,count\n\
                 90001,90002,1\n90002,90003,1\n90001,90003,1\n\
                 90004,90005,1\n90005,90006,1\n90004,90006,1\n";
    fs::write(dir.join("flows.csv"), flows).unwrap();
    let edges =
        "90001\t90002\t1\n90001\t90003\t1\n90002\t90003\t1\n90004\t90005\t1\n90004\t90006\t1\n90005\t90006\t1\n";
    fs::write(dir.join("edges.tsv"), edges).unwrap();
}

#[test]
fn build_round_trips_through_stats() {
    let t = built("7");
    let out = ok(t.path(), &["stats", "b/edges.tsv"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), fs::read_to_string(t.path().join("b/stats.json")).unwrap());
    let stats = read_json(t.path().join("b/stats.json"));
    assert_eq!(stats["n"], 24);
    let manifest = read_json(t.path().join("b/manifest-build.json"));
    assert_eq!(manifest["discharge_type"], "ED Only");
    assert_eq!(manifest["year"], 2018);
    assert!(manifest["argv"].as_array().unwrap().iter().any(|a| a == "build"));
}

#[test]
fn missing_crosswalk_names_the_path() {
    let t = built("1");
    let out = hsa(
        t.path(),
        &[
            "build",
            "--discharges",
            "s/discharges.csv",
            "--crosswalk",
            "no/such/crosswalk.csv",
            "--type",
            "ed-only",
            "--year",
            "2018",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no/such/crosswalk.csv"), "{}", stderr(&out));
}

#[test]
fn empty_selection_exits_two() {
    let t = built("1");
    let out = hsa(
        t.path(),
        &[
            "build",
            "--discharges",
            "s/discharges.csv",
            "--crosswalk",
            "s/crosswalk.csv",
            "--type",
            "Inpatient",
            "--year",
            "2018",
            "-o",
            "x",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn malformed_discharge_row_exits_one() {
    let t = TempDir::new().unwrap();
    let csv = "discharge_type,year,facility_name,facility_zip,patient_zip,count\nED Only,2018,A,94501,95831,abc\n";
    fs::write(t.path().join("d.csv"), csv).unwrap();
    fs::write(t.path().join("c.csv"), "zip,zcta\n94501,94501\n").unwrap();
    let out = hsa(
        t.path(),
        &["build", "--discharges", "d.csv", "--crosswalk", "c.csv", "--type", "ED Only", "--year", "2018"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("row 2"), "{}", stderr(&out));
}

#[test]
fn column_overrides_rename_headers() {
    let t = TempDir::new().unwrap();
    let csv =
        "Type,Year,Facility,FacZip,PatZip,Count\nED Only,2018,A,94501,95831,12\nED Only,2018,A,94501,HOMELESS,3\n";
    fs::write(t.path().join("d.csv"), csv).unwrap();
    fs::write(t.path().join("c.csv"), "zip,zcta\n94501,94501\n95831,95831\n").unwrap();
    let mut args = vec![
        "build",
        "--discharges",
        "d.csv",
        "--crosswalk",
        "c.csv",
        "--type",
        "ED Only",
        "--year",
        "2018",
        "-o",
        "b",
    ];
    for c in ["type=Type", "year=Year", "facility=Facility", "facility_zip=FacZip", "patient_zip=PatZip", "count=Count"]
    {
        args.extend(["--column", c]);
    }
    ok(t.path(), &args);
    assert_eq!(
        fs::read_to_string(t.path().join("b/flows.csv")).unwrap(),
        "patient_zcta,facility_zcta,count\n95831,94501,12\n"
    );
    let m = read_json(t.path().join("b/manifest-build.json"));
    assert_eq!(m["config"]["ingest"]["excluded_discharges"], 3);
    assert_eq!(m["config"]["excluded_fraction"], 0.2);
}

#[test]
fn unknown_algorithm_prints_usage() {
    let t = TempDir::new().unwrap();
    two_triangles(t.path());
    let out = hsa(t.path(), &["detect", "edges.tsv", "--algo", "walktrap"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("walktrap") && err.contains("Usage: hsa detect"), "{err}");
}

#[test]
fn help_and_version_exit_zero() {
    let t = TempDir::new().unwrap();
    assert!(hsa(t.path(), &["--help"]).status.success());
    assert!(hsa(t.path(), &["detect", "--help"]).status.success());
    assert!(hsa(t.path(), &["--version"]).status.success());
    assert_eq!(hsa(t.path(), &[]).status.code(), Some(1));
}

#[test]
fn louvain_splits_two_triangles() {
    let t = TempDir::new().unwrap();
    two_triangles(t.path());
    ok(t.path(), &["detect", "edges.tsv", "--algo", "louvain", "--seed", "3", "-o", "d1"]);
    ok(t.path(), &["detect", "edges.tsv", "--algo", "louvain", "--seed", "3", "-o", "d2"]);
    let a = fs::read(t.path().join("d1/partition-louvain.csv")).unwrap();
    assert_eq!(a, fs::read(t.path().join("d2/partition-louvain.csv")).unwrap());
    assert_eq!(
        String::from_utf8(a).unwrap(),
        "zcta,community_id\n90001,0\n90002,0\n90003,0\n90004,1\n90005,1\n90006,1\n"
    );
    let side = read_json(t.path().join("d1/partition-louvain.json"));
    assert_eq!(side["n_communities"], 2);
    assert_eq!(side["objective"]["name"], "modularity");
    assert_eq!(side["objective"]["value"], 0.5);
    assert!(t.path().join("d1/manifest-detect-louvain.json").exists());
}

#[test]
fn seed_defaults_to_the_environment() {
    let t = built("2");
    ok(t.path(), &["detect", "b/edges.tsv", "--algo", "slpa", "--seed", "41", "-o", "flag"]);
    let out = Command::new(env!("CARGO_BIN_EXE_hsa"))
        .args(["detect", "b/edges.tsv", "--algo", "slpa", "-o", "env"])
        .current_dir(t.path())
        .env("HSA_SEED", "41")
        .output()
        .unwrap();
    assert!(out.status.success());
    let side = read_json(t.path().join("env/partition-slpa.json"));
    assert_eq!(side["seed"], 41);
    assert_eq!(
        fs::read(t.path().join("flag/partition-slpa.csv")).unwrap(),
        fs::read(t.path().join("env/partition-slpa.csv")).unwrap()
    );
}

#[test]
fn all_writes_every_algorithm() {
    let t = built("4");
    ok(t.path(), &["detect", "b/edges.tsv", "--algo", "all", "--seed", "9", "-o", "d"]);
    for a in ["louvain", "infomap", "sbm", "slpa"] {
        for f in [format!("partition-{a}.csv"), format!("partition-{a}.json"), format!("manifest-detect-{a}.json")] {
            assert!(t.path().join("d").join(&f).exists(), "{f}");
        }
        let one = format!("one-{a}");
        ok(t.path(), &["detect", "b/edges.tsv", "--algo", a, "--seed", "9", "-o", &one]);
        assert_eq!(
            fs::read(t.path().join("d").join(format!("partition-{a}.csv"))).unwrap(),
            fs::read(t.path().join(&one).join(format!("partition-{a}.csv"))).unwrap(),
            "{a}"
        );
    }
}

#[test]
fn one_community_evaluates_to_perfect_scores() {
    let t = TempDir::new().unwrap();
    two_triangles(t.path());
    let part = "zcta,community_id\n90001,0\n90002,0\n90003,0\n90004,0\n90005,0\n90006,0\n";
    fs::write(t.path().join("whole.csv"), part).unwrap();
    ok(
        t.path(),
        &[
            "evaluate",
            "--flows",
            "flows.csv",
            "--edges",
            "edges.tsv",
            "--partition",
            "whole.csv",
            "--B",
            "50",
            "-o",
            "r.json",
        ],
    );
    let r = read_json(t.path().join("r.json"));
    assert_eq!(r["li_mean"], 1.0);
    assert_eq!(r["conductance_mean"], 0.0);
    assert_eq!(r["n_communities"], 1);
    assert_eq!(r["algorithm"], Value::Null);
    assert!(t.path().join("manifest-evaluate.json").exists());
}

#[test]
fn partition_missing_a_zcta_is_named() {
    let t = TempDir::new().unwrap();
    two_triangles(t.path());
    let part = "zcta,community_id\n90001,0\n90002,0\n90003,0\n90004,1\n90006,1\n";
    fs::write(t.path().join("p.csv"), part).unwrap();
    let out = hsa(t.path(), &["evaluate", "--flows", "flows.csv", "--edges", "edges.tsv", "--partition", "p.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("90005"), "{}", stderr(&out));
}

fn schema_validator() -> jsonschema::Validator {
    let schema = read_json(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json"));
    jsonschema::validator_for(&schema).unwrap()
}

#[test]
fn reports_validate_against_the_schema() {
    let t = built("5");
    ok(t.path(), &["detect", "b/edges.tsv", "--algo", "all", "-o", "d"]);
    let v = schema_validator();
    for a in ["louvain", "infomap", "sbm", "slpa"] {
        let p = format!("d/partition-{a}.csv");
        ok(
            t.path(),
            &["evaluate", "--flows", "b/flows.csv", "--edges", "b/edges.tsv", "--partition", &p, "--B", "100"],
        );
        let report = read_json(t.path().join(format!("d/report-{a}.json")));
        let errors: Vec<String> = v.iter_errors(&report).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{a}: {errors:?}");
        assert_eq!(report["algorithm"], a);
        assert_eq!(report["discharge_type"], "ED Only");
        assert_eq!(report["year"], 2018);
    }
    // the schema is not vacuous
    let mut bad = read_json(t.path().join("d/report-louvain.json"));
    bad["li_mean"] = json!(1.5);
    assert!(!v.is_valid(&bad));
    bad.as_object_mut().unwrap().remove("li_mean");
    assert!(!v.is_valid(&bad));
}

#[test]
fn undefined_metrics_validate_as_null() {
    let t = TempDir::new().unwrap();
    // facility-only ZCTA 90002 has no resident discharges
    fs::write(t.path().join("flows.csv"), "patient_zcta,facility_zcta,count\n90001,90002,10\n").unwrap();
    fs::write(t.path().join("edges.tsv"), "90001\t90002\t10\n").unwrap();
    fs::write(t.path().join("p.csv"), "zcta,community_id\n90001,0\n90002,1\n").unwrap();
    ok(t.path(), &["evaluate", "--flows", "flows.csv", "--edges", "edges.tsv", "--partition", "p.csv", "-o", "r.json"]);
    let r = read_json(t.path().join("r.json"));
    assert_eq!(r["per_community"][0]["li"], 0.0);
    assert_eq!(r["per_community"][1]["li"], Value::Null);
    assert_eq!(r["undefined_li_count"], 1);
    assert!(schema_validator().is_valid(&r));
}

fn report(dir: &Path, name: &str, algorithm: &str, year: i32, n_c: usize) -> String {
    let r = json!({
        "algorithm": algorithm, "discharge_type": "ED Only", "year": year, "n_communities": n_c,
        "per_community": [{"community_id": 0, "size": 3, "discharges": 10, "li": 0.9, "conductance": 0.1}],
        "li_mean": 0.9, "li_std": 0.01, "conductance_mean": 0.1, "conductance_std": 0.02,
        "discharges_mean": 1234.0, "discharges_std": 56.0,
        "undefined_li_count": 0, "undefined_conductance_count": 0, "seed": 0, "B": 1000
    });
    fs::write(dir.join(name), r.to_string()).unwrap();
    name.to_string()
}

#[test]
fn compare_lays_out_one_row_per_report() {
    let t = TempDir::new().unwrap();
    let a = report(t.path(), "a.json", "louvain", 2012, 24);
    let b = report(t.path(), "b.json", "slpa", 2018, 126);
    let out = ok(t.path(), &["compare", &a, &b, "-o", "cmp"]);
    let csv = fs::read_to_string(t.path().join("cmp/comparison.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "type,year,algorithm,n_c,li_mean,li_std,c_mean,c_std,d_mean,d_std");
    assert_eq!(lines[1], "ED Only,2012,louvain,24,0.9000,0.0100,0.1000,0.0200,1234,56");
    assert_eq!(lines[2], "ED Only,2018,slpa,126,0.9000,0.0100,0.1000,0.0200,1234,56");
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, fs::read_to_string(t.path().join("cmp/comparison.txt")).unwrap());
    let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["type", "year", "algorithm", "n_c", "li", "c", "d"]);
    assert!(text.lines().nth(2).unwrap().contains("0.90 (0.01)"));
}

#[test]
fn compare_needs_two_valid_reports() {
    let t = TempDir::new().unwrap();
    let a = report(t.path(), "a.json", "louvain", 2012, 24);
    assert_eq!(hsa(t.path(), &["compare", &a]).status.code(), Some(1));
    fs::write(t.path().join("bad.json"), r#"{"algorithm": "x"}"#).unwrap();
    let out = hsa(t.path(), &["compare", &a, "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("schema mismatch"), "{}", stderr(&out));
}

fn square(x: f64, y: f64, size: f64) -> Value {
    json!([[[x, y], [x + size, y], [x + size, y + size], [x, y + size], [x, y]]])
}

fn boundaries(dir: &Path, squares: &[(&str, f64, f64, f64)]) {
    let features: Vec<Value> = squares
        .iter()
        .map(|&(z, x, y, s)| json!({"type": "Feature", "properties": {"ZCTA5CE20": z}, "geometry": {"type": "Polygon", "coordinates": square(x, y, s)}}))
        .collect();
    fs::write(dir.join("zcta.geojson"), json!({"type": "FeatureCollection", "features": features}).to_string())
        .unwrap();
}

/// Shoelace area of a Polygon's coordinates, holes subtracted.
fn area(rings: &Value) -> f64 {
    rings
        .as_array()
        .unwrap()
        .iter()
        .map(|ring| {
            let pts: Vec<(f64, f64)> =
                ring.as_array().unwrap().iter().map(|p| (p[0].as_f64().unwrap(), p[1].as_f64().unwrap())).collect();
            let twice: f64 = pts.windows(2).map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1).sum();
            twice / 2.0
        })
        .map(f64::abs)
        .enumerate()
        .map(|(i, a)| if i == 0 { a } else { -a })
        .sum()
}

#[test]
fn export_dissolves_member_squares() {
    let t = TempDir::new().unwrap();
    boundaries(
        t.path(),
        &[("90001", 0.0, 0.0, 1.0), ("90002", 1.0, 0.0, 1.0), ("90003", 0.0, 1.0, 1.0), ("90004", 1.0, 1.0, 1.0)],
    );
    fs::write(t.path().join("p.csv"), "zcta,community_id\n90001,0\n90002,0\n90003,1\n90004,1\n").unwrap();
    ok(t.path(), &["export-geojson", "--partition", "p.csv", "--boundaries", "zcta.geojson", "-o", "hsa.geojson"]);
    let fc = read_json(t.path().join("hsa.geojson"));
    let features = fc["features"].as_array().unwrap();
    assert_eq!(features.len(), 2);
    for f in features {
        assert_eq!(f["geometry"]["type"], "Polygon");
        assert_eq!(f["geometry"]["coordinates"].as_array().unwrap().len(), 1);
        assert!((area(&f["geometry"]["coordinates"]) - 2.0).abs() < 1e-9);
        assert_eq!(f["properties"]["n_zctas"], 2);
    }
    assert_eq!(features[1]["properties"]["members"], json!(["90003", "90004"]));
}

#[test]
fn export_warns_about_missing_boundaries() {
    let t = TempDir::new().unwrap();
    boundaries(t.path(), &[("90001", 0.0, 0.0, 1.0), ("90002", 1.0, 0.0, 1.0)]);
    fs::write(t.path().join("p.csv"), "zcta,community_id\n90001,0\n90002,0\n90009,0\n").unwrap();
    let out =
        ok(t.path(), &["export-geojson", "--partition", "p.csv", "--boundaries", "zcta.geojson", "-o", "hsa.geojson"]);
    assert!(stderr(&out).contains("90009"), "{}", stderr(&out));
    let fc = read_json(t.path().join("hsa.geojson"));
    assert_eq!(fc["features"][0]["properties"]["members"], json!(["90001", "90002"]));
    let m = read_json(t.path().join("manifest-export-geojson.json"));
    assert_eq!(m["config"]["missing_boundaries"], json!(["90009"]));
}

#[test]
fn export_without_overlap_fails() {
    let t = TempDir::new().unwrap();
    boundaries(t.path(), &[("90001", 0.0, 0.0, 1.0)]);
    fs::write(t.path().join("p.csv"), "zcta,community_id\n80001,0\n").unwrap();
    let out =
        hsa(t.path(), &["export-geojson", "--partition", "p.csv", "--boundaries", "zcta.geojson", "-o", "hsa.geojson"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("boundary"), "{}", stderr(&out));
}

#[test]
fn export_reads_a_custom_property() {
    let t = TempDir::new().unwrap();
    let fc = json!({"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {"code": 90001}, "geometry": {"type": "Polygon", "coordinates": square(0.0, 0.0, 2.0)}}
    ]});
    fs::write(t.path().join("b.geojson"), fc.to_string()).unwrap();
    fs::write(t.path().join("p.csv"), "zcta,community_id\n90001,4\n").unwrap();
    ok(
        t.path(),
        &[
            "export-geojson",
            "--partition",
            "p.csv",
            "--boundaries",
            "b.geojson",
            "--zcta-property",
            "code",
            "-o",
            "o.json",
        ],
    );
    let out = read_json(t.path().join("o.json"));
    assert_eq!(out["features"][0]["properties"]["community_id"], 4);
    assert!((area(&out["features"][0]["geometry"]["coordinates"]) - 4.0).abs() < 1e-9);
}

#[test]
fn baseline_feeds_evaluate() {
    let t = built("6");
    ok(t.path(), &["baseline", "--flows", "b/flows.csv", "-o", "bl"]);
    ok(
        t.path(),
        &[
            "evaluate",
            "--flows",
            "b/flows.csv",
            "--edges",
            "b/edges.tsv",
            "--partition",
            "bl/partition-plurality.csv",
            "--B",
            "50",
        ],
    );
    let r = read_json(t.path().join("bl/report-plurality.json"));
    assert_eq!(r["algorithm"], "plurality");
    assert!(schema_validator().is_valid(&r));
}

#[test]
fn baseline_with_towns_and_adjacency() {
    let t = TempDir::new().unwrap();
    // 90003 sends its discharges to town A but its only neighbors, 90004
    // and 90005, belong to B, so the enclave fix moves it
    let flows =
        "patient_zcta,facility_zcta,count\n90001,90001,5\n90002,90001,5\n90003,90001,5\n90004,90004,5\n90005,90004,5\n";
    fs::write(t.path().join("f.csv"), flows).unwrap();
    fs::write(t.path().join("towns.csv"), "facility_zcta,town\n90001,A\n90004,B\n").unwrap();
    let adj = "zcta_a,zcta_b\n90001,90002\n90002,90004\n90003,90004\n90003,90005\n90004,90005\n";
    fs::write(t.path().join("adj.csv"), adj).unwrap();
    ok(t.path(), &["baseline", "--flows", "f.csv", "--towns", "towns.csv", "--adjacency", "adj.csv", "-o", "o"]);
    let side = read_json(t.path().join("o/partition-dartmouth.json"));
    assert_eq!(side["towns"], json!(["A", "B"]));
    assert_eq!(side["enclave_fix"]["reassigned"], 1);
    let csv = fs::read_to_string(t.path().join("o/partition-dartmouth.csv")).unwrap();
    assert_eq!(csv, "zcta,community_id\n90001,0\n90002,0\n90003,1\n90004,1\n90005,1\n");
}
