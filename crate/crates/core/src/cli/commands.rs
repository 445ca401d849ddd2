use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::run::{write, RunLog, Staging, RUN_FILE, TIMINGS_FILE};
use super::{need, ChangeArgs, EvalArgs, IngestArgs, MathcheckArgs, SplitArgs, SynthArgs, TileArgs};
use crate::annotations::labelme::{list_annotation_files, load_annotation_dir};
use crate::annotations::{split_dataset, DatasetSplit, ParseOptions};
use crate::changedet::{
    changes_geojson, match_epochs, region_report, regions_from_geojson, report_csv, summary_markdown, verdict_counts,
    ChangeRecord, MatchCriterion, MatchOptions, MatchStrategy, Region,
};
use crate::detections::{
    assemble_scene_with, georeference_all, instances_from_geojson, instances_to_geojson, parse_detections,
    AssembleOptions, TreeInstance,
};
use crate::error::{Error, Result};
use crate::geojson::FeatureCollection;
use crate::metrics::eval::{curves_csv, parse_threshold_spec};
use crate::metrics::{eval_inputs, evaluate, EvalConfig, EvalSummary, Interpolation};
use crate::raster::scene::scene_paths;
use crate::raster::tiling::read_manifest;
use crate::raster::{tile_scene, Scene, TilingOptions};
use crate::synthgen::{synthesize, SynthSpec};
use crate::training::{run_mathcheck, TrainConfig};

pub(crate) fn exists(path: &Path, flag: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Validation(format!("--{flag}: {} does not exist", path.display())))
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Runs `body` against a staging directory and publishes or quarantines
/// its output.
fn staged(
    staging: Staging,
    command: &str,
    run_name: &str,
    timings_name: &str,
    body: impl FnOnce(&Path, &mut RunLog) -> Result<()>,
) -> Result<()> {
    let mut log = RunLog::new(command);
    let result = body(staging.path(), &mut log).and_then(|_| log.finish(staging.path(), run_name, timings_name));
    match result {
        Ok(()) => staging.commit(),
        Err(e) => {
            if let Some(p) = staging.quarantine() {
                log::warn!("partial output moved to {}", p.display());
            }
            Err(e)
        }
    }
}

pub(crate) fn staged_dir(target: &Path, command: &str, body: impl FnOnce(&Path, &mut RunLog) -> Result<()>) -> Result<()> {
    staged(Staging::for_dir(target)?, command, RUN_FILE, TIMINGS_FILE, body)
}

fn staged_file(file: &Path, command: &str, body: impl FnOnce(&Path, &mut RunLog) -> Result<()>) -> Result<()> {
    let name = file_name(file);
    staged(
        Staging::for_file(file)?,
        command,
        &format!("{name}.run.json"),
        &format!("{name}.timings.json"),
        body,
    )
}

pub(crate) fn tile(a: &TileArgs) -> Result<()> {
    let scene_path = need(&a.scene, "scene")?;
    let out = need(&a.out, "out")?;
    let (sidecar, raw) = scene_paths(scene_path);
    exists(&sidecar, "scene")?;
    exists(&raw, "scene")?;
    let opts = TilingOptions { zoom: a.zoom, stretch: a.stretch, write_raw: a.raw };
    staged_dir(out, "tile", |root, log| {
        log.input(&sidecar)?;
        log.input(&raw)?;
        log.parameters = json!({ "zoom": a.zoom, "stretch": a.stretch, "raw": a.raw });
        let scene = Scene::read(scene_path)?;
        log.stage("read");
        let res = tile_scene(&scene, &opts, root)?;
        log.stage("tile");
        println!("{} tiles at zoom {}", res.manifest.len(), a.zoom);
        Ok(())
    })
}

pub(crate) fn write_split(root: &Path, s: &DatasetSplit) -> Result<()> {
    let mut text = serde_json::to_string_pretty(s).expect("split serializes");
    text.push('\n');
    write(&root.join("split.json"), &text)?;
    for (name, ids) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
        let body: String = ids.iter().map(|id| format!("{id}\n")).collect();
        write(&root.join(format!("{name}.txt")), &body)?;
    }
    Ok(())
}

pub(crate) fn split_dir(dir: &Path, ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    let ids: Vec<String> = list_annotation_files(dir)?.into_iter().map(|(id, _)| id).collect();
    split_dataset(&ids, ratios, seed)
}

pub(crate) fn split(a: &SplitArgs) -> Result<()> {
    let dir = need(&a.annotations, "annotations")?;
    let out = need(&a.out, "out")?;
    exists(dir, "annotations")?;
    staged_dir(out, "split", |root, log| {
        log.input(dir)?;
        log.parameters = json!({ "seed": a.seed, "ratios": [a.ratios.0, a.ratios.1, a.ratios.2] });
        let s = split_dir(dir, a.ratios, a.seed)?;
        write_split(root, &s)?;
        let (tr, va, te) = s.sizes();
        println!("train {tr}, val {va}, test {te}");
        Ok(())
    })
}

/// Tree counts two ways: summed over tiles as detected, and after
/// cross-tile deduplication.
#[derive(Debug, Serialize)]
pub(crate) struct IngestCounts {
    pub epoch: String,
    pub tile_sum: usize,
    pub scene_instances: usize,
    pub rejected: usize,
    pub per_tile: BTreeMap<String, usize>,
}

impl IngestCounts {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("counts serialize");
        text.push('\n');
        text
    }
}

pub(crate) fn ingest_instances(
    detections: &Path,
    manifest: &Path,
    epoch: &str,
    opts: &AssembleOptions,
    log: &mut RunLog,
) -> Result<(Vec<TreeInstance>, IngestCounts)> {
    let parsed = parse_detections(&read_text(detections)?)?;
    for r in &parsed.rejected {
        log.warn(format!("detection {} rejected: {}", r.index, r.reason));
    }
    let entries = read_manifest(manifest)?;
    let placed = georeference_all(&parsed.detections, &entries, epoch)?;
    let trees = assemble_scene_with(&placed, opts)?;
    let mut per_tile = BTreeMap::new();
    for d in &parsed.detections {
        *per_tile.entry(d.tile.to_string()).or_insert(0) += 1;
    }
    let counts = IngestCounts {
        epoch: epoch.to_string(),
        tile_sum: placed.len(),
        scene_instances: trees.len(),
        rejected: parsed.rejected.len(),
        per_tile,
    };
    Ok((trees, counts))
}

pub(crate) fn ingest(a: &IngestArgs) -> Result<()> {
    let det = need(&a.detections, "detections")?;
    let manifest = need(&a.manifest, "manifest")?;
    let epoch = need(&a.epoch, "epoch")?;
    let out = need(&a.out, "out")?;
    exists(det, "detections")?;
    exists(manifest, "manifest")?;
    let opts = AssembleOptions { dedupe_iou: a.dedupe_iou, merge_seam_fragments: !a.no_seam_merge };
    staged_file(out, "ingest", |root, log| {
        log.input(det)?;
        log.input(manifest)?;
        log.parameters = json!({ "epoch": epoch, "dedupe_iou": a.dedupe_iou, "merge_seam_fragments": !a.no_seam_merge });
        let (instances, counts) = ingest_instances(det, manifest, epoch, &opts, log)?;
        let name = file_name(out);
        write(&root.join(&name), &instances_to_geojson(&instances).to_json())?;
        write(&root.join(format!("{name}.counts.json")), &counts.to_json())?;
        log.stage("ingest");
        println!("{} trees in epoch {epoch} ({} detections summed over tiles)", instances.len(), counts.tile_sum);
        Ok(())
    })
}

pub(crate) fn parse_interpolation(s: &str) -> Result<Interpolation> {
    match s {
        "coco101" | "101" => Ok(Interpolation::Coco101),
        "all-point" | "all_point" => Ok(Interpolation::AllPoint),
        _ => Err(Error::Validation(format!("unknown interpolation {s:?} (expected coco101 or all-point)"))),
    }
}

pub(crate) fn evaluate_dir(gt: &Path, pred: &Path, cfg: &EvalConfig, log: &mut RunLog) -> Result<EvalSummary> {
    let files = load_annotation_dir(gt, &ParseOptions::default())?;
    for f in &files {
        for w in &f.warnings {
            log.warn(format!("{}: {w}", f.image_id));
        }
        for r in &f.rejected {
            log.warn(format!("{}: shape {} rejected: {}", f.image_id, r.index, r.reason));
        }
    }
    let parsed = parse_detections(&read_text(pred)?)?;
    for r in &parsed.rejected {
        log.warn(format!("detection {} rejected: {}", r.index, r.reason));
    }
    let inputs = eval_inputs(&files, &parsed.detections);
    if inputs.unannotated > 0 {
        log.warn(format!("{} detections fall on tiles without annotations and were not scored", inputs.unannotated));
    }
    evaluate(&inputs.images, cfg)
}

pub(crate) fn write_eval(root: &Path, stem: &str, summary: &EvalSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    write(&root.join(format!("{stem}.json")), &text)?;
    write(&root.join(format!("{stem}.curves.csv")), &curves_csv(summary))
}

fn fmt_map(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |m| format!("{m:.4}"))
}

pub(crate) fn eval_headline(s: &EvalSummary) -> String {
    let mut line = format!(
        "box mAP@0.5 {} mAP@range {}",
        fmt_map(s.box_metrics.map_50),
        fmt_map(s.box_metrics.map_range)
    );
    if let Some(m) = &s.mask {
        line.push_str(&format!(", mask mAP@0.5 {} mAP@range {}", fmt_map(m.map_50), fmt_map(m.map_range)));
    }
    line
}

pub(crate) fn eval(a: &EvalArgs) -> Result<()> {
    let gt = need(&a.gt, "gt")?;
    let pred = need(&a.pred, "pred")?;
    let out = need(&a.out, "out")?;
    exists(gt, "gt")?;
    exists(pred, "pred")?;
    let cfg = EvalConfig { thresholds: parse_threshold_spec(&a.iou)?, interpolation: parse_interpolation(&a.interpolation)? };
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "summary".into());
    staged_file(out, "eval", |root, log| {
        log.input(gt)?;
        log.input(pred)?;
        log.parameters = json!({ "iou": cfg.thresholds, "interpolation": cfg.interpolation });
        let summary = evaluate_dir(gt, pred, &cfg, log)?;
        log.stage("evaluate");
        write_eval(root, &stem, &summary)?;
        println!("{}", eval_headline(&summary));
        Ok(())
    })
}

pub(crate) fn mathcheck(a: &MathcheckArgs) -> Result<()> {
    if let Some(c) = &a.config {
        exists(c, "config")?;
    }
    staged_dir(&a.out, "mathcheck", |root, log| {
        log.parameters = json!({ "seed": a.seed });
        if let Some(c) = &a.config {
            log.input(c)?;
            let cfg = TrainConfig::from_toml(&read_text(c)?)?;
            write(&root.join("train.toml"), &cfg.to_toml())?;
        }
        let report = run_mathcheck(a.seed)?;
        log.stage("checks");
        let text = report.to_text();
        print!("{text}");
        write(&root.join("report.txt"), &text)?;
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        if failed > 0 {
            return Err(Error::Numerical(format!("{failed} of {} checks failed", report.checks.len())));
        }
        Ok(())
    })
}

pub(crate) fn load_instances(path: &Path) -> Result<Vec<TreeInstance>> {
    instances_from_geojson(&FeatureCollection::parse(&read_text(path)?, &path.display().to_string())?)
}

pub(crate) fn load_regions(path: &Path) -> Result<Vec<Region>> {
    regions_from_geojson(&FeatureCollection::parse(&read_text(path)?, &path.display().to_string())?)
}

pub(crate) fn match_options(max_dist: f64, strategy: &str, min_iou: Option<f64>) -> Result<MatchOptions> {
    let strategy: MatchStrategy = strategy.parse()?;
    let criterion = match min_iou {
        Some(min_iou) => MatchCriterion::Iou { min_iou },
        None => MatchCriterion::Centroid,
    };
    Ok(MatchOptions { max_dist, strategy, criterion })
}

fn describe(opts: &MatchOptions) -> String {
    let strategy = match opts.strategy {
        MatchStrategy::Greedy => "greedy",
        MatchStrategy::Optimal => "optimal",
    };
    let mut s = format!("{strategy} assignment, centroids within {} m", opts.max_dist);
    if let MatchCriterion::Iou { min_iou } = opts.criterion {
        s.push_str(&format!(", outline IoU at least {min_iou}"));
    }
    s
}

/// Matches the epochs and writes the change products into `root`.
pub(crate) fn change_outputs(
    root: &Path,
    before: &[TreeInstance],
    after: &[TreeInstance],
    regions: &[Region],
    opts: &MatchOptions,
    log: &mut RunLog,
) -> Result<Vec<ChangeRecord>> {
    let records = match_epochs(before, after, opts)?;
    let report = region_report(&records, regions);
    for w in &report.warnings {
        log.warn(w.clone());
    }
    let tag = |v: &[TreeInstance], d: &str| v.first().map_or_else(|| d.to_string(), |t| t.epoch.clone());
    write(&root.join("changes.geojson"), &changes_geojson(&records).to_json())?;
    write(&root.join("report.csv"), &report_csv(&report))?;
    write(
        &root.join("summary.md"),
        &summary_markdown(&report, &tag(before, "before"), &tag(after, "after"), &describe(opts)),
    )?;
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write(&root.join("report.json"), &text)?;
    Ok(records)
}

pub(crate) fn change(a: &ChangeArgs) -> Result<()> {
    let before = need(&a.before, "before")?;
    let after = need(&a.after, "after")?;
    let out = need(&a.out, "out")?;
    exists(before, "before")?;
    exists(after, "after")?;
    if let Some(r) = &a.regions {
        exists(r, "regions")?;
    }
    let opts = match_options(a.max_dist, &a.strategy, a.min_iou)?;
    staged_dir(out, "change", |root, log| {
        log.input(before)?;
        log.input(after)?;
        if let Some(r) = &a.regions {
            log.input(r)?;
        }
        log.parameters = serde_json::to_value(opts).expect("options serialize");
        let regions = a.regions.as_deref().map(load_regions).transpose()?.unwrap_or_default();
        let records = change_outputs(root, &load_instances(before)?, &load_instances(after)?, &regions, &opts, log)?;
        log.stage("change");
        let c = verdict_counts(&records);
        println!("persisted {}, lost {}, gained {}", c.persisted, c.lost, c.gained);
        Ok(())
    })
}

pub(crate) fn synth(a: &SynthArgs) -> Result<()> {
    let spec_path = need(&a.spec, "spec")?;
    let out = need(&a.out, "out")?;
    exists(spec_path, "spec")?;
    staged_dir(out, "synth", |root, log| {
        log.input(spec_path)?;
        let mut spec = SynthSpec::from_json(&read_text(spec_path)?)?;
        if let Some(seed) = a.seed {
            spec.seed = seed;
        }
        log.parameters = json!({ "seed": spec.seed });
        let (scene, _) = synthesize(&spec, root)?;
        log.stage("synth");
        let s = &scene.ledger.scene;
        println!(
            "{} trees in {}, {} in {} ({} removed, {} added)",
            s.earlier_count, scene.ledger.epochs[0], s.later_count, scene.ledger.epochs[1], s.lost, s.gained
        );
        Ok(())
    })
}

/// Resolves `p` against `base` unless it is absolute.
pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
