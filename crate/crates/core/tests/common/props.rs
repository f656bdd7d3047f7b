//! Structural properties, shared by the proptest suite and the acceptance
//! runner. Each check returns a description of the first violation.

use std::collections::BTreeSet;

use voxplane::geometry::principal_axes;
use voxplane::io::PlaneSetFile;
use voxplane::octree::{build_root_map, sorted_roots, subdivide, NodeState, OctreeNode};
use voxplane::plane_test::{determine_plane_indexed, quarter_split, split_center};
use voxplane::{run_pipeline, ExtractionConfig, Point3, PointCluster};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Small config grid: root edge, octree levels and point threshold.
pub fn config(root_size: f64, levels: u32, min_points: usize) -> ExtractionConfig {
    ExtractionConfig {
        root_size,
        min_voxel_size: root_size / f64::from(1u32 << levels),
        min_points,
        ..Default::default()
    }
}

pub fn quarter_split_partitions(points: &[Point3]) -> Check {
    if points.len() < 3 {
        return Ok(());
    }
    let cluster = PointCluster::accumulate(points).map_err(|e| e.to_string())?;
    let Ok((eig, centroid)) = principal_axes(&cluster) else {
        return Ok(());
    };
    let center = split_center(&centroid, &eig, 5.0);
    let quarters = quarter_split(points, &eig, &center);
    let mut seen = vec![false; points.len()];
    for (q, members) in quarters.iter().enumerate() {
        for &i in members {
            ensure!(!seen[i], "point {i} in two quarters");
            seen[i] = true;
            let d = points[i].coords() - center.coords();
            let expect = (d.dot(&eig.vector(0)) < 0.0) as usize
                | (((d.dot(&eig.vector(1)) < 0.0) as usize) << 1);
            ensure!(expect == q, "point {i} in quarter {q}, expected {expect}");
        }
    }
    ensure!(seen.iter().all(|&s| s), "some point in no quarter");
    Ok(())
}

fn resolve_roots(points: &[Point3], config: &ExtractionConfig) -> Vec<(Vec<usize>, OctreeNode)> {
    sorted_roots(build_root_map(points, config.root_size))
        .into_iter()
        .map(|(key, idx)| {
            let tree = subdivide(
                OctreeNode::root(key, config.root_size, idx.clone()),
                points,
                config,
                key,
            );
            (idx, tree)
        })
        .collect()
}

/// Leaves of every root tree partition the root's points, each leaf holds
/// only points inside its box, and the depth never exceeds
/// `ceil(log2(root / min))`.
pub fn octree_conserves_points(points: &[Point3], config: &ExtractionConfig) -> Check {
    let bound = (config.root_size / config.min_voxel_size)
        .log2()
        .ceil()
        .max(0.0) as u32;
    let mut total = 0;
    for (idx, tree) in resolve_roots(points, config) {
        let mut from_leaves: Vec<usize> = Vec::new();
        for leaf in tree.leaves() {
            let (c, h) = (leaf.center, leaf.half_extent);
            for &i in &leaf.point_indices {
                let p = points[i];
                let inside = [(p.x, c.x), (p.y, c.y), (p.z, c.z)]
                    .iter()
                    .all(|&(v, m)| v >= m - h - 1e-9 * h && v < m + h + 1e-9 * h);
                ensure!(inside, "point {i} outside its leaf box");
            }
            from_leaves.extend(&leaf.point_indices);
        }
        from_leaves.sort_unstable();
        let mut expect = idx.clone();
        expect.sort_unstable();
        ensure!(from_leaves == expect, "leaves do not partition root points");
        ensure!(
            tree.max_depth() <= bound,
            "depth {} exceeds bound {bound}",
            tree.max_depth()
        );
        total += idx.len();
    }
    ensure!(
        total == points.len(),
        "roots hold {total} of {} points",
        points.len()
    );
    Ok(())
}

/// Every plane leaf passes the plane test again on its own points.
pub fn leaves_are_planar(points: &[Point3], config: &ExtractionConfig) -> Check {
    let params = config.plane_params();
    for (_, tree) in resolve_roots(points, config) {
        for leaf in tree.leaves() {
            if let NodeState::PlaneLeaf(patch) = &leaf.state {
                ensure!(
                    patch.len() >= config.min_points,
                    "plane leaf below min_points"
                );
                let d = determine_plane_indexed(points, &patch.point_indices, &params);
                ensure!(
                    d.is_plane,
                    "plane leaf fails re-check: {:?}",
                    d.reject_reason
                );
            }
        }
    }
    Ok(())
}

/// Groups partition the plane leaves, never mix root keys, and the merged
/// representative covers exactly the members' points.
pub fn merge_partitions_leaves(points: &[Point3], config: &ExtractionConfig) -> Check {
    let ex = run_pipeline(points, config, 1).map_err(|e| e.to_string())?;
    let mut leaves: Vec<Vec<usize>> = ex
        .roots
        .iter()
        .flat_map(|r| r.tree.patches())
        .map(|p| p.point_indices.clone())
        .collect();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut claimed = BTreeSet::new();
    for g in &ex.groups {
        let key = g.merged.root_key;
        let mut union: Vec<usize> = Vec::new();
        for m in &g.members {
            ensure!(
                m.root_key == key,
                "group mixes root keys {:?} and {:?}",
                key,
                m.root_key
            );
            members.push(m.point_indices.clone());
            union.extend(&m.point_indices);
        }
        union.sort_unstable();
        let mut merged = g.merged.point_indices.clone();
        merged.sort_unstable();
        ensure!(union == merged, "merged point set differs from members");
        ensure!(
            g.merged.cluster.n == merged.len(),
            "merged cluster count mismatch"
        );
        for i in merged {
            ensure!(claimed.insert(i), "point {i} in two groups");
        }
    }
    leaves.sort();
    members.sort();
    ensure!(
        leaves == members,
        "groups are not a partition of the plane leaves"
    );
    Ok(())
}

/// Two runs, and a multi-threaded run, give byte-identical plane sets.
pub fn extraction_is_deterministic(points: &[Point3], config: &ExtractionConfig) -> Check {
    let doc = |threads| -> Result<String, String> {
        let ex = run_pipeline(points, config, threads).map_err(|e| e.to_string())?;
        Ok(PlaneSetFile::from_groups(&ex.groups, points.len(), true).to_json())
    };
    let a = doc(1)?;
    ensure!(a == doc(1)?, "two single-threaded runs differ");
    ensure!(a == doc(3)?, "threaded run differs");
    Ok(())
}
