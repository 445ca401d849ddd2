//! Coordinate math, web-mercator XYZ tiling and the raw + sidecar raster
//! container.

pub mod crs;
pub mod pngio;
pub mod scene;
pub mod stretch;
pub mod tile;
pub mod tiling;
pub mod transform;

pub use crs::Crs;
pub use scene::{SampleType, Scene, SceneDescriptor};
pub use stretch::{stretch_to_8bit, Stretch};
pub use tile::{lonlat_to_tile, tile_bounds, GeoBounds, TileIndex, TILE_SIZE};
pub use tiling::{plan_tiles, render_tile, tile_scene, ManifestEntry, RasterTile, TilingOptions};
pub use transform::GeoTransform;
