//! Random space and mapping families shared by the property and acceptance suites.
#![allow(dead_code, clippy::needless_range_loop)]

use crm_core::contraction::{Map, MapSpec};
use crm_core::num::NumOrStr;
use crm_core::space::{Carrier, ControlSpec, DistanceSpec, Space, SpaceDef};
use rand::Rng;

pub fn labels(n: usize) -> Vec<NumOrStr> {
    (1..=n).map(|v| NumOrStr::Num(v as f64)).collect()
}

/// Space over points `1..=n` with the given pairwise distance table.
pub fn table_space(n: usize, dist: impl Fn(usize, usize) -> f64, alpha: ControlSpec) -> Space {
    let pts = labels(n);
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            entries.push((pts[i].clone(), pts[j].clone(), NumOrStr::Num(dist(i, j))));
        }
    }
    Space::new(SpaceDef {
        carrier: Carrier {
            finite: pts,
            intervals: Vec::new(),
        },
        distance: DistanceSpec {
            entries,
            fallback: None,
            symmetric_closure: true,
        },
        alpha,
    })
    .expect("valid random space")
}

/// Random symmetric table on `n` points with entries in `[lo, hi]`.
pub fn random_table<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64, alpha: ControlSpec) -> Space {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            d[i][j] = rng.gen_range(lo..=hi);
            d[j][i] = d[i][j];
        }
    }
    table_space(n, |i, j| d[i][j], alpha)
}

pub fn random_control<R: Rng>(rng: &mut R) -> ControlSpec {
    if rng.gen_bool(0.5) {
        ControlSpec::Const {
            s: rng.gen_range(1.0..=3.0),
        }
    } else {
        ControlSpec::MaxPlus {
            c: rng.gen_range(0.0..=1.0),
        }
    }
}

/// A rooted contraction: point 1 is fixed, every other point maps to its
/// parent in a random tree, and `d(x,y) = rho^max(depth) * f(x,y)` with
/// `f` in `[1, 1 + spread]`, so the Banach ratio is at most `(1 + spread) / rho`.
pub struct TreeContraction {
    pub space: Space,
    pub map: Map,
    pub parent: Vec<usize>,
}

pub fn tree_contraction<R: Rng>(rng: &mut R, n: usize, alpha: ControlSpec) -> TreeContraction {
    let mut parent = vec![0usize; n];
    let mut depth = vec![0u32; n];
    for i in 1..n {
        parent[i] = rng.gen_range(0..i);
        depth[i] = depth[parent[i]] + 1;
    }
    let spread: f64 = rng.gen_range(0.0..0.5);
    let rho: f64 = rng.gen_range(1.0 + spread + 0.05..3.0);
    let mut f = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            f[i][j] = rng.gen_range(1.0..=1.0 + spread);
        }
    }
    let space = table_space(
        n,
        |i, j| rho.powi(depth[i].max(depth[j]) as i32) * f[i][j],
        alpha,
    );
    let pts = labels(n);
    let entries = (0..n)
        .map(|i| (pts[i].clone(), pts[parent[i]].clone()))
        .collect();
    let map = Map::new(&space, MapSpec::Table { entries }).expect("total table map");
    TreeContraction { space, map, parent }
}

/// Random table map on `1..=n`.
pub fn random_map<R: Rng>(rng: &mut R, space: &Space) -> Map {
    let n = space.len();
    let pts = labels(n);
    let entries = (0..n)
        .map(|i| (pts[i].clone(), pts[rng.gen_range(0..n)].clone()))
        .collect();
    Map::new(space, MapSpec::Table { entries }).expect("total table map")
}
