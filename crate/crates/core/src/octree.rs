//! Root-voxel hashing and octree subdivision into planar leaves.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExtractionConfig;
use crate::error::{Error, Result};
use crate::geometry::{principal_axes, validate_points, Point3, PointCluster};
use crate::merge::{greedy_merge, PlaneGroup};
use crate::plane_test::determine_plane_indexed;

/// Integer lattice address of a root voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub ix: i64,
    pub iy: i64,
    pub iz: i64,
}

impl VoxelKey {
    pub const fn new(ix: i64, iy: i64, iz: i64) -> Self {
        Self { ix, iy, iz }
    }

    pub fn offset(&self, dx: i64, dy: i64, dz: i64) -> Self {
        Self::new(self.ix + dx, self.iy + dy, self.iz + dz)
    }

    /// Lower corner of the cube this key addresses.
    pub fn origin(&self, root_size: f64) -> Point3 {
        Point3::new(
            self.ix as f64 * root_size,
            self.iy as f64 * root_size,
            self.iz as f64 * root_size,
        )
    }
}

/// `i` such that `i·size <= x < (i+1)·size`, as evaluated in floating point.
fn lattice_index(x: f64, size: f64) -> i64 {
    let mut i = (x / size).floor();
    if i * size > x {
        i -= 1.0;
    } else if (i + 1.0) * size <= x {
        i += 1.0;
    }
    i as i64
}

pub fn voxel_key(p: &Point3, root_size: f64) -> VoxelKey {
    VoxelKey::new(
        lattice_index(p.x, root_size),
        lattice_index(p.y, root_size),
        lattice_index(p.z, root_size),
    )
}

/// Hash of non-empty root voxels to the indices of the points they hold.
pub fn build_root_map(points: &[Point3], root_size: f64) -> HashMap<VoxelKey, Vec<usize>> {
    let mut map: HashMap<VoxelKey, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        map.entry(voxel_key(p, root_size)).or_default().push(i);
    }
    map
}

/// Root map entries in lattice order.
pub fn sorted_roots(map: HashMap<VoxelKey, Vec<usize>>) -> Vec<(VoxelKey, Vec<usize>)> {
    let mut roots: Vec<_> = map.into_iter().collect();
    roots.sort_unstable_by_key(|(k, _)| *k);
    roots
}

/// One extracted planar segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanePatch {
    pub cluster: PointCluster,
    pub centroid: Point3,
    /// Eigenvector of the smallest eigenvalue.
    pub normal: Vector3<f64>,
    pub lambdas: [f64; 3],
    pub point_indices: Vec<usize>,
    pub root_key: VoxelKey,
    pub depth: u32,
}

impl PlanePatch {
    /// Builds a patch by decomposing the covariance of `cluster`.
    pub fn from_cluster(
        cluster: PointCluster,
        point_indices: Vec<usize>,
        root_key: VoxelKey,
        depth: u32,
    ) -> Result<Self> {
        let (eig, centroid) = principal_axes(&cluster)?;
        Ok(Self {
            cluster,
            centroid,
            normal: eig.normal(),
            lambdas: eig.lambda,
            point_indices,
            root_key,
            depth,
        })
    }

    pub fn len(&self) -> usize {
        self.cluster.n
    }

    pub fn is_empty(&self) -> bool {
        self.cluster.n == 0
    }

    /// Plane offset `n·c`.
    pub fn offset(&self) -> f64 {
        self.normal.dot(&self.centroid.coords())
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum NodeState {
    PlaneLeaf(PlanePatch),
    Discarded,
    Internal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OctreeNode {
    pub center: Point3,
    pub half_extent: f64,
    pub depth: u32,
    pub point_indices: Vec<usize>,
    pub children: [Option<Box<OctreeNode>>; 8],
    pub state: NodeState,
}

impl OctreeNode {
    /// Unresolved node covering the root voxel `key`.
    pub fn root(key: VoxelKey, root_size: f64, point_indices: Vec<usize>) -> Self {
        let o = key.origin(root_size);
        let h = root_size * 0.5;
        Self::unresolved(Point3::new(o.x + h, o.y + h, o.z + h), h, 0, point_indices)
    }

    fn unresolved(center: Point3, half_extent: f64, depth: u32, point_indices: Vec<usize>) -> Self {
        Self {
            center,
            half_extent,
            depth,
            point_indices,
            children: Default::default(),
            state: NodeState::Discarded,
        }
    }

    pub fn edge(&self) -> f64 {
        2.0 * self.half_extent
    }

    pub fn children(&self) -> impl Iterator<Item = &OctreeNode> {
        self.children.iter().filter_map(|c| c.as_deref())
    }

    /// Leaves in depth-first order, octants ascending.
    pub fn leaves(&self) -> Vec<&OctreeNode> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a OctreeNode>) {
        match self.state {
            NodeState::Internal => self.children().for_each(|c| c.collect_leaves(out)),
            _ => out.push(self),
        }
    }

    /// Plane patches of the subtree, depth-first with octants ascending.
    pub fn patches(&self) -> Vec<&PlanePatch> {
        self.leaves()
            .into_iter()
            .filter_map(|n| match &n.state {
                NodeState::PlaneLeaf(p) => Some(p),
                _ => None,
            })
            .collect()
    }

    pub fn max_depth(&self) -> u32 {
        self.children()
            .map(|c| c.max_depth())
            .max()
            .unwrap_or(self.depth)
    }

    /// Octant of `p` relative to this node's center. Points on a splitting
    /// plane go to the upper side.
    #[inline]
    pub fn octant_of(&self, p: &Point3) -> usize {
        (p.x >= self.center.x) as usize
            | (((p.y >= self.center.y) as usize) << 1)
            | (((p.z >= self.center.z) as usize) << 2)
    }

    fn child_center(&self, octant: usize) -> Point3 {
        let q = self.half_extent * 0.5;
        let sign = |bit: usize| if octant & bit != 0 { q } else { -q };
        Point3::new(
            self.center.x + sign(1),
            self.center.y + sign(2),
            self.center.z + sign(4),
        )
    }
}

/// Resolves `node` into plane leaves, discarded leaves and internal nodes.
pub fn subdivide(
    mut node: OctreeNode,
    points: &[Point3],
    config: &ExtractionConfig,
    root_key: VoxelKey,
) -> OctreeNode {
    let params = config.plane_params();
    if node.point_indices.len() < config.min_points {
        node.state = NodeState::Discarded;
        return node;
    }
    let decision = determine_plane_indexed(points, &node.point_indices, &params);
    if decision.is_plane {
        let eig = decision.eig.expect("tested decision carries eigen");
        node.state = NodeState::PlaneLeaf(PlanePatch {
            cluster: decision.cluster,
            centroid: decision.centroid.expect("tested decision carries centroid"),
            normal: eig.normal(),
            lambdas: eig.lambda,
            point_indices: node.point_indices.clone(),
            root_key,
            depth: node.depth,
        });
        return node;
    }
    if !config.can_split(node.edge()) {
        node.state = NodeState::Discarded;
        return node;
    }

    let mut buckets: [Vec<usize>; 8] = Default::default();
    for &i in &node.point_indices {
        buckets[node.octant_of(&points[i])].push(i);
    }
    for (octant, bucket) in buckets.into_iter().enumerate() {
        if bucket.is_empty() {
            continue;
        }
        let child = OctreeNode::unresolved(
            node.child_center(octant),
            node.half_extent * 0.5,
            node.depth + 1,
            bucket,
        );
        node.children[octant] = Some(Box::new(subdivide(child, points, config, root_key)));
    }
    node.state = NodeState::Internal;
    node
}

/// A resolved root voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct RootVoxel {
    pub key: VoxelKey,
    pub tree: OctreeNode,
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub voxelize: f64,
    pub subdivide: f64,
    pub merge: f64,
    pub total: f64,
}

/// Full pipeline output: the resolved octrees and the plane groups.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub roots: Vec<RootVoxel>,
    pub groups: Vec<PlaneGroup>,
    pub timings: StageTimings,
}

impl Extraction {
    pub fn patch_count(&self) -> usize {
        self.roots.iter().map(|r| r.tree.patches().len()).sum()
    }
}

/// Runs voxelization, subdivision and (if enabled) merging. Root voxels are
/// resolved on `threads` workers; output order is independent of it.
pub fn run_pipeline(
    points: &[Point3],
    config: &ExtractionConfig,
    threads: usize,
) -> Result<Extraction> {
    config.validate()?;
    validate_points(points)?;
    let start = Instant::now();

    let roots = sorted_roots(build_root_map(points, config.root_size));
    let t_voxelize = start.elapsed().as_secs_f64();

    let resolve = |(key, indices): (VoxelKey, Vec<usize>)| RootVoxel {
        key,
        tree: subdivide(
            OctreeNode::root(key, config.root_size, indices),
            points,
            config,
            key,
        ),
    };
    let roots: Vec<RootVoxel> = if threads <= 1 {
        roots.into_iter().map(resolve).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| roots.into_par_iter().map(resolve).collect())
    };
    let t_subdivide = start.elapsed().as_secs_f64();

    let mut groups = Vec::new();
    for root in &roots {
        let patches: Vec<PlanePatch> = root.tree.patches().into_iter().cloned().collect();
        if config.merging_enabled {
            groups.extend(greedy_merge(patches, &config.merge_params));
        } else {
            groups.extend(patches.into_iter().map(PlaneGroup::single));
        }
    }
    let t_total = start.elapsed().as_secs_f64();

    Ok(Extraction {
        roots,
        groups,
        timings: StageTimings {
            voxelize: t_voxelize,
            subdivide: t_subdivide - t_voxelize,
            merge: t_total - t_subdivide,
            total: t_total,
        },
    })
}

/// Plane groups of `points`, in root-key order.
pub fn extract_planes(points: &[Point3], config: &ExtractionConfig) -> Result<Vec<PlaneGroup>> {
    Ok(run_pipeline(points, config, 1)?.groups)
}
