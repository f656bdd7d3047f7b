#![allow(dead_code)]

pub mod oracle;
pub mod props;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxplane::Point3;

/// Random scene for property tests: a few tilted noisy planes plus scattered
/// outliers, all inside `[-extent, extent]^3`.
pub fn random_cloud(
    seed: u64,
    planes: usize,
    outliers: usize,
    sigma: f64,
    extent: f64,
) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::new();
    for _ in 0..planes {
        let n = loop {
            let v = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0f64),
            ];
            let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if len > 0.1 {
                break [v[0] / len, v[1] / len, v[2] / len];
            }
        };
        // any vector not parallel to n, then Gram-Schmidt
        let a = if n[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let u = normalize(sub(a, scale(n, dot(a, n))));
        let v = cross(n, u);
        let c = [
            rng.gen_range(-extent..extent) * 0.5,
            rng.gen_range(-extent..extent) * 0.5,
            rng.gen_range(-extent..extent) * 0.5,
        ];
        let count = rng.gen_range(50..600);
        for _ in 0..count {
            let s = rng.gen_range(-extent..extent) * 0.6;
            let t = rng.gen_range(-extent..extent) * 0.6;
            let e = if sigma > 0.0 {
                rng.gen_range(-sigma..sigma)
            } else {
                0.0
            };
            let p = add(add(c, scale(u, s)), add(scale(v, t), scale(n, e)));
            if p.iter().all(|x| x.abs() <= extent) {
                pts.push(Point3::new(p[0], p[1], p[2]));
            }
        }
    }
    for _ in 0..outliers {
        pts.push(Point3::new(
            rng.gen_range(-extent..extent),
            rng.gen_range(-extent..extent),
            rng.gen_range(-extent..extent),
        ));
    }
    pts
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
pub fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
pub fn normalize(a: [f64; 3]) -> [f64; 3] {
    scale(a, 1.0 / dot(a, a).sqrt())
}

/// Path of a checked-in fixture.
pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Set `VOXPLANE_BLESS=1` to rewrite fixtures from the current build.
pub fn blessing() -> bool {
    std::env::var_os("VOXPLANE_BLESS").is_some_and(|v| v == "1")
}
