use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use hsa_core::baseline::{dartmouth, plurality_assign, Adjacency, FacilityTownMap};
use hsa_core::detect::{
    detect, objective_value, read_membership_csv, write_membership_csv, DetectConfig, Membership, Partition,
};
use hsa_core::evaluate::evaluate_partition;
use hsa_core::geojson::{export_communities, read_boundaries};
use hsa_core::graph::{stats_with, Hpdn, NetworkStats};
use hsa_core::ingest::{
    build_hpdn, parse_discharges, prepare_flows, write_discharges, ColumnMap, Crosswalk, FlowTable,
};
use hsa_core::synth::{discharge_records, generate, PlantedConfig};
use log::info;
use rayon::prelude::*;
use serde_json::json;

use crate::compare::{self, Row};
use crate::manifest::{write_json, RunManifest};
use crate::{
    BaselineArgs, BuildArgs, Command, CompareArgs, DetectArgs, EvaluateArgs, ExportArgs, StatsArgs, SynthArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Build(a) => build(a),
        Command::Stats(a) => stats(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare_cmd(a),
        Command::ExportGeojson(a) => export_geojson(a),
        Command::Synth(a) => synth(a),
        Command::Baseline(a) => baseline(a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// Runs `fill` against a buffered file at `path`.
fn create<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> hsa_core::Result<()>,
{
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    fill(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

fn read_edges(path: &Path) -> Result<Hpdn> {
    Hpdn::read_edges_tsv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_flows(path: &Path) -> Result<FlowTable> {
    FlowTable::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_partition(path: &Path) -> Result<Membership> {
    read_membership_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn stats_json(s: &NetworkStats) -> Result<String> {
    let mut text = serde_json::to_string_pretty(s)?;
    text.push('\n');
    Ok(text)
}

fn build(a: BuildArgs) -> Result<()> {
    let mut columns = ColumnMap::default();
    for pair in &a.columns {
        let (key, header) =
            pair.split_once('=').with_context(|| format!("column override `{pair}` is not KEY=HEADER"))?;
        columns.set(key.trim(), header.trim())?;
    }
    let records = parse_discharges(open(&a.discharges)?, &columns)
        .with_context(|| format!("reading {}", a.discharges.display()))?;
    let crosswalk =
        Crosswalk::from_reader(open(&a.crosswalk)?).with_context(|| format!("reading {}", a.crosswalk.display()))?;
    let (flows, summary) = prepare_flows(records, &crosswalk, a.unmapped_policy, a.discharge_type, a.year)?;
    let g = build_hpdn(&flows)?;
    let s = stats_with(&g, a.clustering.into())?;
    info!("{} ZCTAs, {} edges, {} discharges", s.n, s.m, s.w);

    out_dir(&a.out)?;
    let paths = ["flows.csv", "edges.tsv", "stats.json"].map(|f| a.out.join(f));
    create(&paths[0], |w| flows.write_csv(w))?;
    create(&paths[1], |w| g.write_edges_tsv(w))?;
    fs::write(&paths[2], stats_json(&s)?).with_context(|| format!("cannot write {}", paths[2].display()))?;

    let mut m = RunManifest::new("build", &a.out);
    m.input("discharges", &a.discharges).input("crosswalk", &a.crosswalk);
    m.outputs = paths.to_vec();
    m.discharge_type = Some(a.discharge_type.to_string());
    m.year = Some(a.year);
    m.config = json!({
        "unmapped_policy": a.unmapped_policy,
        "columns": columns,
        "clustering": Into::<hsa_core::graph::Clustering>::into(a.clustering),
        "ingest": summary,
        "excluded_fraction": flows.excluded_fraction(),
    });
    m.write()?;
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let g = read_edges(&a.edges)?;
    let text = stats_json(&stats_with(&g, a.clustering.into())?)?;
    match &a.out {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            let dir = parent(path);
            let mut m = RunManifest::new("stats", &dir);
            m.input("edges", &a.edges);
            m.outputs = vec![path.clone()];
            m.write()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn detect_cmd(a: DetectArgs) -> Result<()> {
    let g = read_edges(&a.edges)?;
    let configs: Vec<DetectConfig> = a
        .algo
        .algorithms()
        .into_iter()
        .map(|algorithm| DetectConfig {
            algorithm,
            seed: a.seed,
            slpa_iterations: a.slpa_iters,
            slpa_threshold: a.slpa_r,
            louvain_resolution: a.resolution,
            sbm_mcmc_sweeps: a.sweeps,
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let results: Vec<Result<Partition>> = configs
        .par_iter()
        .map(|c| {
            let start = Instant::now();
            let p = detect(&g, c)?;
            info!("{}: {} communities in {:.3}s", c.algorithm, p.n_communities(), start.elapsed().as_secs_f64());
            Ok(p)
        })
        .collect();

    out_dir(&a.out)?;
    for (c, p) in configs.iter().zip(results) {
        let p = p?;
        let name = c.algorithm.as_str();
        let csv_path = a.out.join(format!("partition-{name}.csv"));
        let json_path = a.out.join(format!("partition-{name}.json"));
        let membership = p.to_membership(&g)?;
        create(&csv_path, |w| write_membership_csv(&membership, w))?;
        let objective = objective_value(&g, &p, c.algorithm)?;
        write_json(
            &json_path,
            &json!({
                "algorithm": name,
                "seed": c.seed,
                "n_communities": p.n_communities(),
                "objective": objective,
                "config": c,
            }),
        )?;
        let mut m = RunManifest::new("detect", &a.out);
        m.input("edges", &a.edges);
        m.outputs = vec![csv_path, json_path];
        m.algorithm = Some(name.to_string());
        m.seed = Some(c.seed);
        m.config = serde_json::to_value(c)?;
        m.write()?;
    }
    Ok(())
}

/// `partition-x.csv` -> `partition-x.json`, if present.
fn sidecar_algorithm(partition: &Path) -> Result<Option<String>> {
    let path = partition.with_extension("json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("bad sidecar {}", path.display()))?;
    Ok(v.get("algorithm").and_then(|a| a.as_str()).map(str::to_string))
}

fn parent(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let mut flows = read_flows(&a.flows)?;
    let g = read_edges(&a.edges)?;
    let membership = read_partition(&a.partition)?;
    let p = Partition::from_membership(&g, &membership)
        .with_context(|| format!("partition {} does not cover {}", a.partition.display(), a.edges.display()))?;

    let build_manifest = parent(&a.flows).join("manifest-build.json");
    let built = if build_manifest.exists() { Some(RunManifest::read(&build_manifest)?) } else { None };
    flows.discharge_type = match a.discharge_type {
        Some(t) => Some(t),
        None => built
            .as_ref()
            .and_then(|m| m.discharge_type.as_deref())
            .map(|t| t.parse().map_err(anyhow::Error::msg))
            .transpose()?,
    };
    flows.year = a.year.or(built.as_ref().and_then(|m| m.year));
    let algorithm = match a.algorithm {
        Some(name) => Some(name),
        None => sidecar_algorithm(&a.partition)?,
    };

    let mut report = evaluate_partition(&flows, &g, &p, a.bootstrap, a.seed)?;
    report.algorithm = algorithm.clone();

    let out = a.out.unwrap_or_else(|| {
        let stem = algorithm.as_deref().unwrap_or("partition");
        parent(&a.partition).join(format!("report-{stem}.json"))
    });
    let dir = parent(&out);
    out_dir(&dir)?;
    write_json(&out, &report)?;

    let mut m = RunManifest::new("evaluate", &dir);
    m.input("flows", &a.flows).input("edges", &a.edges).input("partition", &a.partition);
    m.outputs = vec![out];
    m.discharge_type = report.discharge_type.clone();
    m.year = report.year;
    m.algorithm = algorithm;
    m.seed = Some(a.seed);
    m.config = json!({ "B": a.bootstrap });
    m.write()?;
    Ok(())
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    if a.reports.len() < 2 {
        bail!("compare needs at least two reports, got {}", a.reports.len());
    }
    let rows =
        a.reports.iter().map(|p| compare::read_report(p).map(|r| Row::from(&r))).collect::<Result<Vec<Row>>>()?;
    out_dir(&a.out)?;
    let csv_path = a.out.join("comparison.csv");
    let txt_path = a.out.join("comparison.txt");
    let text = compare::to_text(&rows);
    fs::write(&csv_path, compare::to_csv(&rows)?).with_context(|| format!("cannot write {}", csv_path.display()))?;
    fs::write(&txt_path, &text).with_context(|| format!("cannot write {}", txt_path.display()))?;
    print!("{text}");

    let mut m = RunManifest::new("compare", &a.out);
    for (i, p) in a.reports.iter().enumerate() {
        m.input(&format!("report{i}"), p);
    }
    m.outputs = vec![csv_path, txt_path];
    m.write()?;
    Ok(())
}

fn export_geojson(a: ExportArgs) -> Result<()> {
    let membership = read_partition(&a.partition)?;
    let boundaries = read_boundaries(open(&a.boundaries)?, a.zcta_property.as_deref())
        .with_context(|| format!("reading {}", a.boundaries.display()))?;
    let export = export_communities(&membership, &boundaries)?;
    let dir = parent(&a.out);
    out_dir(&dir)?;
    write_json(&a.out, &export.collection)?;

    let mut m = RunManifest::new("export-geojson", &dir);
    m.input("partition", &a.partition).input("boundaries", &a.boundaries);
    m.outputs = vec![a.out.clone()];
    m.config = json!({ "zcta_property": a.zcta_property, "missing_boundaries": export.missing });
    m.write()?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = PlantedConfig {
        community_sizes: vec![a.size; a.communities],
        mean_internal_flow: a.internal,
        mean_external_flow: a.external,
        hub_fraction: a.hub_fraction,
        seed: a.seed,
    };
    let planted = generate(&config)?;
    let records = discharge_records(&planted.flows, a.discharge_type, a.year);

    out_dir(&a.out)?;
    let paths = ["discharges.csv", "crosswalk.csv", "flows.csv", "truth.csv"].map(|f| a.out.join(f));
    create(&paths[0], |w| write_discharges(&records, w))?;
    create(&paths[1], |w| {
        writeln!(w, "zip,zcta")?;
        for z in planted.truth.keys() {
            writeln!(w, "{z},{z}")?;
        }
        Ok(())
    })?;
    create(&paths[2], |w| planted.flows.write_csv(w))?;
    create(&paths[3], |w| write_membership_csv(&planted.truth, w))?;

    let mut m = RunManifest::new("synth", &a.out);
    m.outputs = paths.to_vec();
    m.discharge_type = Some(a.discharge_type.to_string());
    m.year = Some(a.year);
    m.seed = Some(a.seed);
    m.config = json!({ "planted": config, "hubs": planted.hubs });
    m.write()?;
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let flows = read_flows(&a.flows)?;
    let towns = match &a.towns {
        Some(path) => {
            FacilityTownMap::from_reader(open(path)?).with_context(|| format!("reading {}", path.display()))?
        }
        None => FacilityTownMap::degenerate(&flows),
    };
    let (name, membership, town_names, enclave) = match &a.adjacency {
        Some(path) => {
            let adj = Adjacency::from_reader(open(path)?).with_context(|| format!("reading {}", path.display()))?;
            let (tp, fix) = dartmouth(&flows, &towns, &adj)?;
            let enclave = json!({ "iterations": fix.iterations, "reassigned": fix.reassigned });
            ("dartmouth", fix.membership, tp.towns, enclave)
        }
        None => {
            let tp = plurality_assign(&flows, &towns)?;
            ("plurality", tp.membership, tp.towns, serde_json::Value::Null)
        }
    };
    out_dir(&a.out)?;
    let csv_path = a.out.join(format!("partition-{name}.csv"));
    let json_path = a.out.join(format!("partition-{name}.json"));
    create(&csv_path, |w| write_membership_csv(&membership, w))?;
    write_json(&json_path, &json!({ "algorithm": name, "towns": town_names, "enclave_fix": enclave }))?;

    let mut m = RunManifest::new("baseline", &a.out);
    m.input("flows", &a.flows);
    if let Some(p) = &a.towns {
        m.input("towns", p);
    }
    if let Some(p) = &a.adjacency {
        m.input("adjacency", p);
    }
    m.outputs = vec![csv_path, json_path];
    m.algorithm = Some(name.to_string());
    m.write()?;
    Ok(())
}
