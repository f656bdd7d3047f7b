//! C ABI over `voxplane`.
//!
//! Clouds and plane sets are opaque handles created and freed here. Every
//! fallible call returns a [`VpStatus`]; on failure a message is available
//! from [`vp_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use voxplane::io::{self, CloudFormat, PlaneSetFile};
use voxplane::synthetic::Scene;
use voxplane::{
    Error, ErrorCategory, ExtractionConfig, MergeParams, PlaneGroup, PlaneTestParams, Point3,
};

/// Status codes shared by every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VpStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad points, malformed files, index out of range.
    InvalidInput = 2,
    Config = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Point cloud, optionally with per-point labels.
pub struct VpCloud {
    points: Vec<Point3>,
    labels: Option<Vec<i32>>,
}

/// Extracted plane groups.
pub struct VpPlaneSet {
    groups: Vec<PlaneGroup>,
    cloud_len: usize,
}

/// Extraction parameters; see `vp_config_default` for the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VpConfig {
    pub root_size: f64,
    pub min_voxel_size: f64,
    pub min_points: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub sigma_shift_multiple: f64,
    /// Degrees.
    pub eps1: f64,
    /// Degrees.
    pub eps2: f64,
    pub merging_enabled: bool,
}

/// Summary of one plane group.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VpPlaneInfo {
    pub centroid: [f64; 3],
    pub normal: [f64; 3],
    /// Descending.
    pub eigenvalues: [f64; 3],
    pub point_count: usize,
    pub member_patches: usize,
    pub root_key: [i64; 3],
    /// Shallowest octree depth among the members.
    pub depth: u32,
}

impl From<&ExtractionConfig> for VpConfig {
    fn from(c: &ExtractionConfig) -> Self {
        Self {
            root_size: c.root_size,
            min_voxel_size: c.min_voxel_size,
            min_points: c.min_points,
            tau1: c.plane_params.tau1,
            tau2: c.plane_params.tau2,
            sigma_shift_multiple: c.plane_params.sigma_shift_multiple,
            eps1: c.merge_params.eps1,
            eps2: c.merge_params.eps2,
            merging_enabled: c.merging_enabled,
        }
    }
}

impl From<&VpConfig> for ExtractionConfig {
    fn from(c: &VpConfig) -> Self {
        let d = ExtractionConfig::default();
        ExtractionConfig {
            root_size: c.root_size,
            min_voxel_size: c.min_voxel_size,
            min_points: c.min_points,
            plane_params: PlaneTestParams {
                tau1: c.tau1,
                tau2: c.tau2,
                sigma_shift_multiple: c.sigma_shift_multiple,
                min_points: c.min_points,
            },
            merge_params: MergeParams {
                eps1: c.eps1,
                eps2: c.eps2,
                ..d.merge_params
            },
            merging_enabled: c.merging_enabled,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: VpStatus, msg: impl Into<String>) -> VpStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> VpStatus {
    let status = match e.category() {
        ErrorCategory::Input => VpStatus::InvalidInput,
        ErrorCategory::Config => VpStatus::Config,
        ErrorCategory::Io => VpStatus::Io,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning a panic into `VpStatus::Panic`.
fn guard(f: impl FnOnce() -> VpStatus) -> VpStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        fail(VpStatus::Panic, msg)
    })
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, VpStatus> {
    if path.is_null() {
        return Err(fail(VpStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(VpStatus::InvalidInput, "path is not UTF-8"))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Copies `len` points from `xyz` (interleaved x, y, z).
///
/// # Safety
/// `xyz` must point to `3 * len` doubles (it may be null when `len` is 0)
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vp_cloud_new(
    xyz: *const f64,
    len: usize,
    out: *mut *mut VpCloud,
) -> VpStatus {
    guard(|| {
        if out.is_null() || (xyz.is_null() && len > 0) {
            return fail(VpStatus::NullPointer, "null argument");
        }
        let raw: &[f64] = if len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(xyz, 3 * len)
        };
        let points: Vec<Point3> = raw
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        if let Err(e) = voxplane::geometry::validate_points(&points) {
            return from_error(&e);
        }
        *out = Box::into_raw(Box::new(VpCloud {
            points,
            labels: None,
        }));
        VpStatus::Ok
    })
}

/// Reads a cloud file; the format is detected from its content.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vp_cloud_read(path: *const c_char, out: *mut *mut VpCloud) -> VpStatus {
    guard(|| {
        if out.is_null() {
            return fail(VpStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match io::read_cloud(path, CloudFormat::Auto) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(VpCloud {
                    points: c.points,
                    labels: c.labels,
                }));
                VpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Generates a named synthetic scene (`plane`, `corner`, `fp-slab`,
/// `slab-object`, `rooms`) with ground-truth labels.
///
/// # Safety
/// `scene` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vp_synth(
    scene: *const c_char,
    sigma: f64,
    seed: u64,
    out: *mut *mut VpCloud,
) -> VpStatus {
    guard(|| {
        if scene.is_null() || out.is_null() {
            return fail(VpStatus::NullPointer, "null argument");
        }
        let name = CStr::from_ptr(scene).to_string_lossy();
        let Some(kind) = Scene::parse(&name) else {
            return fail(VpStatus::InvalidInput, format!("unknown scene `{name}`"));
        };
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return fail(VpStatus::Config, "sigma must be non-negative");
        }
        match kind.generate(sigma, seed) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(VpCloud {
                    points: c.points,
                    labels: Some(c.labels),
                }));
                VpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Number of points; 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vp_cloud_len(cloud: *const VpCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.points.len())
}

/// Borrows the interleaved coordinates (`3 * len` doubles).
///
/// # Safety
/// `cloud` must be a live handle; the pointer dies with it.
#[no_mangle]
pub unsafe extern "C" fn vp_cloud_points(cloud: *const VpCloud) -> *const f64 {
    cloud
        .as_ref()
        .map_or(ptr::null(), |c| c.points.as_ptr().cast())
}

/// Borrows the labels, or null when the cloud has none.
///
/// # Safety
/// `cloud` must be a live handle; the pointer dies with it.
#[no_mangle]
pub unsafe extern "C" fn vp_cloud_labels(cloud: *const VpCloud) -> *const i32 {
    cloud
        .as_ref()
        .and_then(|c| c.labels.as_ref())
        .map_or(ptr::null(), |l| l.as_ptr())
}

/// # Safety
/// `cloud` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vp_cloud_free(cloud: *mut VpCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

#[no_mangle]
pub extern "C" fn vp_config_default() -> VpConfig {
    VpConfig::from(&ExtractionConfig::default())
}

/// Loads the `[extraction]` table of a TOML settings file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vp_config_load(path: *const c_char, out: *mut VpConfig) -> VpStatus {
    guard(|| {
        if out.is_null() {
            return fail(VpStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match voxplane::Settings::load(path) {
            Ok(s) => {
                *out = VpConfig::from(&s.extraction);
                VpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Extracts plane groups. A null `config` means the defaults; `threads` of
/// 0 or 1 runs single-threaded.
///
/// # Safety
/// `cloud` must be a live handle, `config` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vp_extract(
    cloud: *const VpCloud,
    config: *const VpConfig,
    threads: usize,
    out: *mut *mut VpPlaneSet,
) -> VpStatus {
    guard(|| {
        let (Some(cloud), false) = (cloud.as_ref(), out.is_null()) else {
            return fail(VpStatus::NullPointer, "null argument");
        };
        let config = config
            .as_ref()
            .map_or_else(ExtractionConfig::default, ExtractionConfig::from);
        match voxplane::run_pipeline(&cloud.points, &config, threads.max(1)) {
            Ok(ex) => {
                *out = Box::into_raw(Box::new(VpPlaneSet {
                    groups: ex.groups,
                    cloud_len: cloud.points.len(),
                }));
                VpStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vp_planes_len(set: *const VpPlaneSet) -> usize {
    set.as_ref().map_or(0, |s| s.groups.len())
}

/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vp_planes_get(
    set: *const VpPlaneSet,
    index: usize,
    out: *mut VpPlaneInfo,
) -> VpStatus {
    guard(|| {
        let (Some(set), false) = (set.as_ref(), out.is_null()) else {
            return fail(VpStatus::NullPointer, "null argument");
        };
        let Some(g) = set.groups.get(index) else {
            return fail(
                VpStatus::InvalidInput,
                format!("group {index} out of range"),
            );
        };
        let m = &g.merged;
        let k = m.root_key;
        *out = VpPlaneInfo {
            centroid: m.centroid.to_array(),
            normal: [m.normal.x, m.normal.y, m.normal.z],
            eigenvalues: m.lambdas,
            point_count: m.point_indices.len(),
            member_patches: g.members.len(),
            root_key: [k.ix, k.iy, k.iz],
            depth: m.depth,
        };
        VpStatus::Ok
    })
}

/// Borrows the cloud indices of group `index`.
///
/// # Safety
/// `set` must be a live handle, `indices` and `len` writable. The array
/// dies with the set.
#[no_mangle]
pub unsafe extern "C" fn vp_planes_indices(
    set: *const VpPlaneSet,
    index: usize,
    indices: *mut *const usize,
    len: *mut usize,
) -> VpStatus {
    guard(|| {
        let (Some(set), false, false) = (set.as_ref(), indices.is_null(), len.is_null()) else {
            return fail(VpStatus::NullPointer, "null argument");
        };
        let Some(g) = set.groups.get(index) else {
            return fail(
                VpStatus::InvalidInput,
                format!("group {index} out of range"),
            );
        };
        *indices = g.merged.point_indices.as_ptr();
        *len = g.merged.point_indices.len();
        VpStatus::Ok
    })
}

/// Writes the plane-set JSON document.
///
/// # Safety
/// `set` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vp_planes_write(
    set: *const VpPlaneSet,
    path: *const c_char,
    with_indices: bool,
) -> VpStatus {
    guard(|| {
        let Some(set) = set.as_ref() else {
            return fail(VpStatus::NullPointer, "set is null");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let doc = PlaneSetFile::from_groups(&set.groups, set.cloud_len, with_indices);
        match io::write_planes(path, &doc) {
            Ok(()) => VpStatus::Ok,
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `set` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vp_planes_free(set: *mut VpPlaneSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_c_struct() {
        let d = ExtractionConfig::default();
        assert_eq!(ExtractionConfig::from(&VpConfig::from(&d)), d);
    }

    #[test]
    fn panics_are_contained() {
        assert_eq!(guard(|| panic!("boom")), VpStatus::Panic);
        let msg = unsafe { CStr::from_ptr(vp_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "boom");
    }
}
