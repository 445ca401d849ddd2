//! Detection results: parsing, georeferencing and scene assembly.

pub mod assemble;
pub mod georef;
pub mod gridmask;
pub mod instance;
pub mod parse;

pub use assemble::{assemble_scene, assemble_scene_with, AssembleOptions, DEFAULT_DEDUPE_IOU};
pub use georef::{georeference, georeference_all, instance_id, TileFrame};
pub use gridmask::{GridMask, GRID_M};
pub use instance::{instances_from_geojson, instances_to_geojson, TreeInstance};
pub use parse::{detections_json, parse_detections, Detection, DetectionRecord, ParsedDetections, RejectedDetection};
