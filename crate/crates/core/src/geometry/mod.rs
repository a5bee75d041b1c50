//! Mesh ingestion, camera rigs and rasterization.

pub mod camera;
pub mod fixtures;
pub mod mesh;
pub mod raster;

pub use camera::{build_camera_rig, mirror_view_index, previous_view_index, Camera, RigConfig};
pub use mesh::{load_mesh, parse_obj, Mesh, MeshError, Vec2, Vec3};
pub use raster::{rasterize, GBuffer};
