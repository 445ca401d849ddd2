//! `canopy-delta pipeline`: every stage driven by one TOML file.
//!
//! Relative paths in the file are resolved against the file's directory.
//! Command-line flags override file keys, which override built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::commands::{
    change_outputs, eval_headline, evaluate_dir, exists, ingest_instances, load_regions, match_options,
    parse_interpolation, read_text, resolve, split_dir, staged_dir, write_eval, write_split,
};
use super::run::{write, RunLog};
use super::{need, PipelineArgs};
use crate::changedet::{verdict_counts, MatchOptions, Region};
use crate::detections::{AssembleOptions, DEFAULT_DEDUPE_IOU};
use crate::error::{Error, Result};
use crate::metrics::eval::parse_threshold_spec;
use crate::metrics::EvalConfig;
use crate::raster::tiling::MANIFEST_FILE;
use crate::raster::{tile_scene, Scene, TilingOptions};
use crate::synthgen::write::{DETECTIONS_FILE, REGIONS_FILE, SCENE_STEM, TILE_ANNOTATIONS_DIR};
use crate::synthgen::{check_against_ledger, synthesize, SynthSpec, LEDGER_TOLERANCE_M};
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthStage {
    /// Generator spec; the pipeline synthesizes both epochs from it first.
    pub spec: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochInputs {
    pub tag: String,
    pub scene: PathBuf,
    pub detections: PathBuf,
    /// Per-tile LabelMe files; enables the split and eval stages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TilingStage {
    pub zoom: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stretch: Option<[f64; 2]>,
}

impl Default for TilingStage {
    fn default() -> Self {
        TilingStage { zoom: 18, stretch: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitStage {
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl Default for SplitStage {
    fn default() -> Self {
        SplitStage { seed: 0, ratios: [0.7, 0.2, 0.1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalStage {
    pub iou: String,
    pub interpolation: String,
}

impl Default for EvalStage {
    fn default() -> Self {
        EvalStage { iou: "0.5:0.95".into(), interpolation: "coco101".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChangeStage {
    pub max_dist: f64,
    pub strategy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_iou: Option<f64>,
    pub dedupe_iou: f64,
    pub merge_seam_fragments: bool,
}

impl Default for ChangeStage {
    fn default() -> Self {
        ChangeStage {
            max_dist: crate::changedet::DEFAULT_MAX_DIST_M,
            strategy: "greedy".into(),
            min_iou: None,
            dedupe_iou: DEFAULT_DEDUPE_IOU,
            merge_seam_fragments: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthStage>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epochs: Vec<EpochInputs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<PathBuf>,
    #[serde(default)]
    pub tiling: TilingStage,
    #[serde(default)]
    pub split: SplitStage,
    #[serde(default)]
    pub eval: EvalStage,
    #[serde(default)]
    pub change: ChangeStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("pipeline config: {}", e.to_string().trim())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        exists(path, "config")?;
        Self::from_toml(&read_text(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config serializes")
    }

    fn apply(&mut self, a: &PipelineArgs) {
        if let Some(s) = &a.strategy {
            self.change.strategy = s.clone();
        }
        if let Some(d) = a.max_dist {
            self.change.max_dist = d;
        }
        if let Some(s) = a.seed {
            self.split.seed = s;
        }
        if let Some(z) = a.zoom {
            self.tiling.zoom = z;
        }
    }
}

/// Everything resolved and checked before any output is written.
struct Plan {
    cfg: PipelineConfig,
    base: PathBuf,
    out: PathBuf,
    synth: Option<SynthSpec>,
    match_opts: MatchOptions,
    eval_cfg: EvalConfig,
    assemble: AssembleOptions,
}

fn plan(a: &PipelineArgs) -> Result<Plan> {
    let config_path = need(&a.config, "config")?;
    let mut cfg = PipelineConfig::load(config_path)?;
    cfg.apply(a);
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match (&a.out, &cfg.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => resolve(&base, o),
        (None, None) => return Err(Error::Validation("missing required flag --out (or `out` in the config)".into())),
    };

    let synth = match &cfg.synth {
        Some(s) => {
            if !cfg.epochs.is_empty() {
                return Err(Error::Config("config sets both [synth] and [[epochs]]".into()));
            }
            let p = resolve(&base, &s.spec);
            exists(&p, "synth.spec")?;
            Some(SynthSpec::from_json(&read_text(&p)?)?)
        }
        None => {
            if cfg.epochs.len() != 2 {
                return Err(Error::Config(format!("pipeline needs exactly two [[epochs]], got {}", cfg.epochs.len())));
            }
            if cfg.epochs[0].tag == cfg.epochs[1].tag {
                return Err(Error::Config("epoch tags must differ".into()));
            }
            for e in &cfg.epochs {
                let (sidecar, raw) = crate::raster::scene::scene_paths(&resolve(&base, &e.scene));
                exists(&sidecar, "epochs.scene")?;
                exists(&raw, "epochs.scene")?;
                exists(&resolve(&base, &e.detections), "epochs.detections")?;
                if let Some(ann) = &e.annotations {
                    exists(&resolve(&base, ann), "epochs.annotations")?;
                }
            }
            None
        }
    };
    if let Some(r) = &cfg.regions {
        exists(&resolve(&base, r), "regions")?;
    }
    if let Some(t) = &cfg.train {
        t.validate()?;
    }
    let match_opts = match_options(cfg.change.max_dist, &cfg.change.strategy, cfg.change.min_iou)?;
    let eval_cfg = EvalConfig {
        thresholds: parse_threshold_spec(&cfg.eval.iou)?,
        interpolation: parse_interpolation(&cfg.eval.interpolation)?,
    };
    let assemble = AssembleOptions {
        dedupe_iou: cfg.change.dedupe_iou,
        merge_seam_fragments: cfg.change.merge_seam_fragments,
    };
    Ok(Plan { cfg, base, out, synth, match_opts, eval_cfg, assemble })
}

/// Inputs of one epoch once the synth stage (if any) has run.
struct Epoch {
    tag: String,
    scene: PathBuf,
    detections: PathBuf,
    annotations: Option<PathBuf>,
}

fn stages(p: &Plan, config_path: &Path, root: &Path, log: &mut RunLog) -> Result<()> {
    log.input(config_path)?;
    let mut recorded = p.cfg.clone();
    recorded.out = None;
    recorded.jobs = None;
    log.parameters = serde_json::to_value(&recorded).expect("config serializes");

    let mut ledger = None;
    let (epochs, regions_path): (Vec<Epoch>, Option<PathBuf>) = match &p.synth {
        Some(spec) => {
            log.input(&resolve(&p.base, &p.cfg.synth.as_ref().expect("synth stage").spec))?;
            let dir = root.join("synth");
            let (scene, _) = synthesize(spec, &dir)?;
            log.stage("synth");
            let epochs = scene
                .ledger
                .epochs
                .iter()
                .map(|tag| Epoch {
                    tag: tag.clone(),
                    scene: dir.join(tag).join(SCENE_STEM),
                    detections: dir.join(tag).join(DETECTIONS_FILE),
                    annotations: Some(dir.join(tag).join(TILE_ANNOTATIONS_DIR)),
                })
                .collect();
            ledger = Some(scene.ledger);
            let regions = p.cfg.regions.as_ref().map(|r| resolve(&p.base, r)).unwrap_or_else(|| dir.join(REGIONS_FILE));
            (epochs, Some(regions))
        }
        None => {
            let epochs = p
                .cfg
                .epochs
                .iter()
                .map(|e| Epoch {
                    tag: e.tag.clone(),
                    scene: resolve(&p.base, &e.scene),
                    detections: resolve(&p.base, &e.detections),
                    annotations: e.annotations.as_ref().map(|a| resolve(&p.base, a)),
                })
                .collect::<Vec<_>>();
            for e in &epochs {
                let (sidecar, raw) = crate::raster::scene::scene_paths(&e.scene);
                log.input(&sidecar)?;
                log.input(&raw)?;
                log.input(&e.detections)?;
                if let Some(a) = &e.annotations {
                    log.input(a)?;
                }
            }
            (epochs, p.cfg.regions.as_ref().map(|r| resolve(&p.base, r)))
        }
    };
    let regions: Vec<Region> = match &regions_path {
        Some(r) => {
            if p.synth.is_none() {
                log.input(r)?;
            }
            load_regions(r)?
        }
        None => Vec::new(),
    };

    let tiling = TilingOptions {
        zoom: p.cfg.tiling.zoom,
        stretch: p.cfg.tiling.stretch.map(|[a, b]| (a, b)),
        write_raw: false,
    };
    let mut instances = Vec::new();
    for e in &epochs {
        let tiles = root.join("tiles").join(&e.tag);
        tile_scene(&Scene::read(&e.scene)?, &tiling, &tiles)?;
        log.stage(&format!("tile {}", e.tag));

        if let Some(ann) = &e.annotations {
            let [tr, va, te] = p.cfg.split.ratios;
            let s = split_dir(ann, (tr, va, te), p.cfg.split.seed)?;
            write_split(&root.join("split").join(&e.tag), &s)?;
            log.stage(&format!("split {}", e.tag));
        }

        let (inst, counts) = ingest_instances(&e.detections, &tiles.join(MANIFEST_FILE), &e.tag, &p.assemble, log)?;
        write(
            &root.join("instances").join(format!("{}.geojson", e.tag)),
            &crate::detections::instances_to_geojson(&inst).to_json(),
        )?;
        write(&root.join("instances").join(format!("{}.counts.json", e.tag)), &counts.to_json())?;
        log.stage(&format!("ingest {}", e.tag));

        if let Some(ann) = &e.annotations {
            let summary = evaluate_dir(ann, &e.detections, &p.eval_cfg, log)?;
            write_eval(&root.join("eval"), &e.tag, &summary)?;
            println!("{}: {} trees, {}", e.tag, inst.len(), eval_headline(&summary));
            log.stage(&format!("eval {}", e.tag));
        } else {
            println!("{}: {} trees", e.tag, inst.len());
        }
        instances.push(inst);
    }

    let records = change_outputs(&root.join("change"), &instances[0], &instances[1], &regions, &p.match_opts, log)?;
    let c = verdict_counts(&records);
    println!("change: persisted {}, lost {}, gained {}", c.persisted, c.lost, c.gained);
    log.stage("change");

    if let Some(ledger) = &ledger {
        let check = check_against_ledger(ledger, &records, LEDGER_TOLERANCE_M);
        let mut text = serde_json::to_string_pretty(&check).expect("check serializes");
        text.push('\n');
        write(&root.join("ledger_check.json"), &text)?;
        if check.exact {
            println!("ledger: recovered exactly");
        } else {
            log.warn(format!("ledger not recovered exactly: {} mismatches", check.mismatches.len()));
        }
    }
    if let Some(t) = &p.cfg.train {
        write(&root.join("train.toml"), &t.to_toml())?;
    }
    Ok(())
}

pub(crate) fn run_pipeline(a: &PipelineArgs) -> Result<()> {
    let p = plan(a)?;
    let config_path = need(&a.config, "config")?;
    staged_dir(&p.out, "pipeline", |root, log| stages(&p, config_path, root, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
        assert!(PipelineConfig::from_toml("[change]\nmax_distance = 3.0").is_err());
    }

    #[test]
    fn defaults_and_round_trip() {
        let cfg = PipelineConfig::from_toml("[synth]\nspec = \"spec.json\"\n[change]\nstrategy = \"optimal\"").unwrap();
        assert_eq!(cfg.tiling.zoom, 18);
        assert_eq!(cfg.change.max_dist, 2.5);
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
