//! Plane extraction for LiDAR point clouds.
//!
//! The cloud is hashed into fixed-size root voxels. Each root voxel is
//! tested for planarity and, when it fails, split recursively into octants
//! until every leaf is either a plane or too small to continue. Coplanar
//! leaves inside one root voxel are then merged into plane groups.
//!
//! ```
//! use voxplane::{extract_planes, synthetic, ExtractionConfig};
//!
//! let scene = synthetic::gen_corner(2.0, 300.0, 0.005, 7);
//! let groups = extract_planes(&scene.points, &ExtractionConfig::default()).unwrap();
//! assert!(groups.len() >= 3);
//! ```

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod merge;
pub mod octree;
pub mod ransac;
pub mod synthetic;

pub use config::{ExtractionConfig, Settings};
pub use error::{Error, ErrorCategory, Result};
pub use geometry::{eigen_symmetric3, EigenDecomposition, Point3, PointCluster};
pub use merge::{coplanar_test, greedy_merge, MergeParams, PlaneGroup};
pub use octree::{extract_planes, run_pipeline, Extraction, PlanePatch, StageTimings, VoxelKey};
pub use plane_test::{determine_plane, PlaneDecision, PlaneTestParams, RejectReason};
pub use ransac::{ransac_extract_all, ransac_plane, RansacParams};
