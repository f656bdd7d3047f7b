//! Point cloud readers and writers, plus the plane-set document.
//!
//! Supported inputs are ASCII PLY (vertex element with `x y z`, optional
//! `label`), whitespace-separated XYZ text (three columns, or four with an
//! integer label) and the native labeled binary format:
//!
//! ```text
//! offset  size  field
//! 0       8     magic  "VXPLCLD\0"
//! 8       4     version, u32 LE (= 1)
//! 12      4     flags, u32 LE; bit 0 = labels present
//! 16      8     point count, u64 LE
//! 24      ...   records: x, y, z as f64 LE, then an i32 LE label if flagged
//! ```
//!
//! The path `-` reads from stdin or writes to stdout.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ExtractedPlane;
use crate::geometry::Point3;
use crate::merge::PlaneGroup;

pub const LABELED_MAGIC: &[u8; 8] = b"VXPLCLD\0";
pub const LABELED_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum CloudFormat {
    #[default]
    Auto,
    PlyAscii,
    Xyz,
    Labeled,
}

/// Points with optional per-point labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub labels: Option<Vec<i32>>,
}

fn is_stdio(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    if is_stdio(path) {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(path, e))?;
        Ok(buf)
    } else {
        std::fs::read(path).map_err(|e| Error::read(path, e))
    }
}

/// Writes `bytes` to `path`, or stdout for `-`.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if is_stdio(path) {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    } else {
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

pub fn read_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let bytes = read_bytes(path)?;
    parse_cloud(path, &bytes, format)
}

/// Parses an in-memory cloud; `path` only labels errors.
pub fn parse_cloud(path: &Path, bytes: &[u8], format: CloudFormat) -> Result<PointCloud> {
    if bytes.is_empty() {
        log::warn!("{}: empty file, no points", path.display());
        return Ok(PointCloud::default());
    }
    let format = match format {
        CloudFormat::Auto => sniff(path, bytes)?,
        f => f,
    };
    match format {
        CloudFormat::Labeled => parse_labeled(path, bytes),
        CloudFormat::PlyAscii => parse_ply(path, as_text(path, bytes)?),
        CloudFormat::Xyz => parse_xyz(path, as_text(path, bytes)?),
        CloudFormat::Auto => unreachable!(),
    }
}

fn sniff(path: &Path, bytes: &[u8]) -> Result<CloudFormat> {
    if bytes.starts_with(LABELED_MAGIC) {
        return Ok(CloudFormat::Labeled);
    }
    if bytes.starts_with(b"ply") {
        return Ok(CloudFormat::PlyAscii);
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("xyz") | Some("txt") | Some("xyzl") => Ok(CloudFormat::Xyz),
        _ if std::str::from_utf8(bytes).is_ok() => Ok(CloudFormat::Xyz),
        _ => Err(Error::UnknownFormat { path: path.into() }),
    }
}

fn as_text<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.into(),
        line: 1 + bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count(),
        detail: "invalid UTF-8".into(),
    })
}

fn parse_labeled(path: &Path, bytes: &[u8]) -> Result<PointCloud> {
    let truncated = |detail: String| Error::Truncated {
        path: path.into(),
        detail,
    };
    if bytes.len() < HEADER_LEN {
        return Err(truncated(format!(
            "header needs {HEADER_LEN} bytes, found {}",
            bytes.len()
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != LABELED_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            found: version,
            expected: LABELED_VERSION,
        });
    }
    let flags = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let has_labels = flags & 1 != 0;
    let record = if has_labels { 28 } else { 24 };
    let body = &bytes[HEADER_LEN..];
    let expected = (count as u128) * record as u128;
    if (body.len() as u128) < expected {
        return Err(truncated(format!(
            "{count} records of {record} bytes need {expected} bytes, found {}",
            body.len()
        )));
    }
    if body.len() as u128 > expected {
        return Err(Error::Parse {
            path: path.into(),
            line: 0,
            detail: format!(
                "{} trailing bytes after {count} records",
                body.len() as u128 - expected
            ),
        });
    }
    let count = count as usize;
    let mut points = Vec::with_capacity(count);
    let mut labels = has_labels.then(|| Vec::with_capacity(count));
    for (i, rec) in body.chunks_exact(record).enumerate() {
        let f = |k: usize| f64::from_le_bytes(rec[8 * k..8 * k + 8].try_into().unwrap());
        let p = Point3::new(f(0), f(1), f(2));
        if !p.is_finite() {
            return Err(Error::NonFiniteValue {
                path: path.into(),
                line: i + 1,
            });
        }
        points.push(p);
        if let Some(l) = labels.as_mut() {
            l.push(i32::from_le_bytes(rec[24..28].try_into().unwrap()));
        }
    }
    Ok(PointCloud { points, labels })
}

fn parse_f64(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        path: path.into(),
        line,
        detail: format!("invalid number {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue {
            path: path.into(),
            line,
        });
    }
    Ok(v)
}

fn parse_label(path: &Path, line: usize, tok: &str) -> Result<i32> {
    tok.parse().map_err(|_| Error::Parse {
        path: path.into(),
        line,
        detail: format!("invalid label {tok:?}"),
    })
}

fn parse_xyz(path: &Path, text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut columns = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let cols = *columns.get_or_insert(toks.len());
        if !(cols == 3 || cols == 4) || toks.len() != cols {
            return Err(Error::Parse {
                path: path.into(),
                line,
                detail: format!(
                    "expected {} columns, found {}",
                    if cols == 4 { 4 } else { 3 },
                    toks.len()
                ),
            });
        }
        points.push(Point3::new(
            parse_f64(path, line, toks[0])?,
            parse_f64(path, line, toks[1])?,
            parse_f64(path, line, toks[2])?,
        ));
        if cols == 4 {
            labels.push(parse_label(path, line, toks[3])?);
        }
    }
    if points.is_empty() {
        log::warn!("{}: no points", path.display());
    }
    Ok(PointCloud {
        points,
        labels: (columns == Some(4)).then_some(labels),
    })
}

fn parse_ply(path: &Path, text: &str) -> Result<PointCloud> {
    let err = |line: usize, detail: &str| Error::Parse {
        path: path.into(),
        line,
        detail: detail.into(),
    };
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(err(1, "missing ply magic")),
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut header_done = false;
    for (line, l) in lines.by_ref() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => {
                header_done = true;
                break;
            }
            ["format", "ascii", _] => {}
            ["format", other, ..] => {
                return Err(err(line, &format!("unsupported ply format {other}")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    if vertex_count.is_some() {
                        return Err(err(line, "duplicate vertex element"));
                    }
                    vertex_count = Some(
                        n.parse::<usize>()
                            .map_err(|_| err(line, "invalid vertex count"))?,
                    );
                } else if vertex_count.is_none() {
                    return Err(err(line, "vertex element must come first"));
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(err(line, "list properties on vertices are unsupported"))
            }
            ["property", _ty, name] if in_vertex => props.push(name.to_string()),
            ["property", ..] => {}
            _ => return Err(err(line, &format!("unexpected header line {l:?}"))),
        }
    }
    if !header_done {
        return Err(Error::Truncated {
            path: path.into(),
            detail: "ply header has no end_header".into(),
        });
    }
    let count = vertex_count.ok_or_else(|| err(1, "no vertex element"))?;
    let find = |name: &str| props.iter().position(|p| p == name);
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(err(1, "vertex element lacks x, y or z")),
    };
    let il = find("label");
    let mut points = Vec::with_capacity(count);
    let mut labels = il.map(|_| Vec::with_capacity(count));
    for (line, l) in lines {
        if points.len() == count {
            break;
        }
        if l.is_empty() {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != props.len() {
            return Err(err(
                line,
                &format!("expected {} values, found {}", props.len(), toks.len()),
            ));
        }
        points.push(Point3::new(
            parse_f64(path, line, toks[ix])?,
            parse_f64(path, line, toks[iy])?,
            parse_f64(path, line, toks[iz])?,
        ));
        if let (Some(i), Some(ls)) = (il, labels.as_mut()) {
            ls.push(parse_label(path, line, toks[i])?);
        }
    }
    if points.len() < count {
        return Err(Error::Truncated {
            path: path.into(),
            detail: format!("header declares {count} vertices, found {}", points.len()),
        });
    }
    Ok(PointCloud { points, labels })
}

pub fn encode_labeled(points: &[Point3], labels: Option<&[i32]>) -> Vec<u8> {
    let record = if labels.is_some() { 28 } else { 24 };
    let mut out = Vec::with_capacity(HEADER_LEN + record * points.len());
    out.extend_from_slice(LABELED_MAGIC);
    out.extend_from_slice(&LABELED_VERSION.to_le_bytes());
    out.extend_from_slice(&(labels.is_some() as u32).to_le_bytes());
    out.extend_from_slice(&(points.len() as u64).to_le_bytes());
    for (i, p) in points.iter().enumerate() {
        for v in p.to_array() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(l) = labels {
            out.extend_from_slice(&l[i].to_le_bytes());
        }
    }
    out
}

pub fn write_labeled(path: &Path, points: &[Point3], labels: Option<&[i32]>) -> Result<()> {
    write_bytes(path, &encode_labeled(points, labels))
}

pub fn write_xyz(path: &Path, points: &[Point3], labels: Option<&[i32]>) -> Result<()> {
    let mut s = String::new();
    for (i, p) in points.iter().enumerate() {
        match labels {
            Some(l) => writeln!(s, "{} {} {} {}", p.x, p.y, p.z, l[i]),
            None => writeln!(s, "{} {} {}", p.x, p.y, p.z),
        }
        .unwrap();
    }
    write_bytes(path, s.as_bytes())
}

pub fn write_ply_ascii(path: &Path, points: &[Point3], labels: Option<&[i32]>) -> Result<()> {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    writeln!(s, "element vertex {}", points.len()).unwrap();
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if labels.is_some() {
        s.push_str("property int label\n");
    }
    s.push_str("end_header\n");
    for (i, p) in points.iter().enumerate() {
        match labels {
            Some(l) => writeln!(s, "{} {} {} {}", p.x, p.y, p.z, l[i]),
            None => writeln!(s, "{} {} {}", p.x, p.y, p.z),
        }
        .unwrap();
    }
    write_bytes(path, s.as_bytes())
}

/// Writes a cloud in the format implied by the extension of `path`:
/// `.ply` ASCII PLY, `.xyz`/`.txt` XYZ text, anything else (and stdout) the
/// labeled binary format.
pub fn write_cloud(path: &Path, points: &[Point3], labels: Option<&[i32]>) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("ply") => write_ply_ascii(path, points, labels),
        Some("xyz") | Some("txt") => write_xyz(path, points, labels),
        _ => write_labeled(path, points, labels),
    }
}

pub const PLANE_SET_FORMAT: &str = "voxplane-planes";
pub const PLANE_SET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneRecord {
    pub root_key: [i64; 3],
    pub point_count: usize,
    pub centroid: [f64; 3],
    pub normal: [f64; 3],
    pub eigenvalues: [f64; 3],
    pub depth_histogram: Vec<usize>,
    pub members: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_indices: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSetFile {
    pub format: String,
    pub version: u32,
    pub cloud_point_count: usize,
    pub groups: Vec<PlaneRecord>,
}

impl PlaneSetFile {
    pub fn from_groups(
        groups: &[PlaneGroup],
        cloud_point_count: usize,
        with_indices: bool,
    ) -> Self {
        let groups = groups
            .iter()
            .map(|g| {
                let m = &g.merged;
                let k = m.root_key;
                PlaneRecord {
                    root_key: [k.ix, k.iy, k.iz],
                    point_count: m.cluster.n,
                    centroid: m.centroid.to_array(),
                    normal: [m.normal.x, m.normal.y, m.normal.z],
                    eigenvalues: m.lambdas,
                    depth_histogram: g.depth_histogram(),
                    members: g.members.len(),
                    point_indices: with_indices.then(|| m.point_indices.clone()),
                }
            })
            .collect();
        Self {
            format: PLANE_SET_FORMAT.into(),
            version: PLANE_SET_VERSION,
            cloud_point_count,
            groups,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plane set serializes");
        s.push('\n');
        s
    }

    pub fn from_json(path: &Path, text: &str) -> Result<Self> {
        let parsed: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.into(),
            line: e.line(),
            detail: e.to_string(),
        })?;
        if parsed.format != PLANE_SET_FORMAT {
            return Err(Error::UnknownFormat { path: path.into() });
        }
        if parsed.version != PLANE_SET_VERSION {
            return Err(Error::UnsupportedVersion {
                path: path.into(),
                found: parsed.version,
                expected: PLANE_SET_VERSION,
            });
        }
        Ok(parsed)
    }
}

pub fn write_planes(path: &Path, planes: &PlaneSetFile) -> Result<()> {
    write_bytes(path, planes.to_json().as_bytes())
}

pub fn read_planes(path: &Path) -> Result<PlaneSetFile> {
    let bytes = read_bytes(path)?;
    PlaneSetFile::from_json(path, as_text(path, &bytes)?)
}

impl ExtractedPlane for PlaneRecord {
    fn member_indices(&self) -> &[usize] {
        self.point_indices.as_deref().unwrap_or(&[])
    }
    fn plane_normal(&self) -> Vector3<f64> {
        Vector3::from(self.normal)
    }
    fn plane_centroid(&self) -> Point3 {
        self.centroid.into()
    }
}

/// Color of group `index`: hues stepped by the golden angle at fixed
/// saturation and value.
pub fn palette(index: usize) -> [u8; 3] {
    let h = (index as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let (s, v) = (0.75, 0.95);
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |f: f64| ((f + m) * 255.0).round() as u8;
    [q(r), q(g), q(b)]
}

/// ASCII PLY of the grouped points only, one palette color per group.
pub fn write_colored_cloud<P: ExtractedPlane>(
    path: &Path,
    points: &[Point3],
    groups: &[P],
) -> Result<()> {
    let total: usize = groups.iter().map(|g| g.member_indices().len()).sum();
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    writeln!(s, "element vertex {total}").unwrap();
    s.push_str(
        "property double x\nproperty double y\nproperty double z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
    );
    for (k, g) in groups.iter().enumerate() {
        let [r, gr, b] = palette(k);
        for &i in g.member_indices() {
            let p = points.get(i).ok_or_else(|| Error::Parse {
                path: PathBuf::from("<groups>"),
                line: 0,
                detail: format!("point index {i} out of range"),
            })?;
            writeln!(s, "{} {} {} {r} {gr} {b}", p.x, p.y, p.z).unwrap();
        }
    }
    write_bytes(path, s.as_bytes())
}
