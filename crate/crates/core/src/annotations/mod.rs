//! Polygon annotation ingestion, rasterization to instance masks and the
//! seeded train/val/test split.

pub mod labelme;
pub mod mask;
pub mod split;

pub use labelme::{parse_annotation_file, AnnotationFile, ParseOptions, PolygonAnnotation};
pub use mask::{polygon_to_mask, scanline_spans, InstanceMask};
pub use split::{split_dataset, DatasetSplit};
