#![allow(dead_code)]

use cp1_brownian::moebius::{chordal_distance, CP1Point, MoebiusMap, C64};

/// Largest ratio `P(x, z) / P(y, z)` of Poisson kernels of `D(0, big_r)`
/// over `x, y` on a polar grid of `D(0, r)` (5 radii × 40 angles each) and
/// `z` on 720 points of the circle of radius `big_r`.
pub fn harnack_grid_max(r: f64, big_r: f64) -> f64 {
    let pts: Vec<C64> = (1..=5)
        .flat_map(|i| {
            (0..40).map(move |j| C64::from_polar(r * i as f64 / 5.0, std::f64::consts::TAU * j as f64 / 40.0))
        })
        .collect();
    let zs: Vec<C64> = (0..720).map(|j| C64::from_polar(big_r, std::f64::consts::TAU * j as f64 / 720.0)).collect();
    let kernel = |x: C64, z: C64| (big_r * big_r - x.norm_sqr()) / (x - z).norm_sqr();
    let mut best = 0.0f64;
    for z in &zs {
        let ks: Vec<f64> = pts.iter().map(|x| kernel(*x, *z)).collect();
        let (lo, hi) = ks.iter().fold((f64::INFINITY, 0.0f64), |(a, b), k| (a.min(*k), b.max(*k)));
        best = best.max(hi / lo);
    }
    best
}

/// `n` points spread over the sphere (Fibonacci lattice).
pub fn sphere_grid(n: usize) -> Vec<CP1Point> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let h = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let s = (1.0 - h * h).sqrt();
            let phi = golden * i as f64;
            CP1Point::from_sphere([s * phi.cos(), s * phi.sin(), h])
        })
        .collect()
}

/// Violations of the two containments for `g` with contraction centers
/// `y` (repelling) and `z` (attracting) and singular parameter `a = |α|`:
/// points outside `D(y, 1/a)` must land in `D(z, 1/a)`, points of
/// `D(y, 1/a²)` must land outside `D(z, 1/2)`.
pub fn lemma_violations(g: &MoebiusMap, y: &CP1Point, z: &CP1Point, a: f64, pts: &[CP1Point]) -> (usize, usize) {
    let (r1, r2) = (1.0 / a, 1.0 / (a * a));
    let mut v = (0, 0);
    for p in pts {
        let dy = chordal_distance(p, y);
        let dz = chordal_distance(&g.apply(p), z);
        if dy >= r1 && dz > r1 {
            v.0 += 1;
        }
        if dy <= r2 && dz < 0.5 {
            v.1 += 1;
        }
    }
    v
}

/// Sphere grid plus points on and near both lemma circles about `y`.
pub fn lemma_grid(y: &CP1Point, a: f64, total: usize) -> Vec<CP1Point> {
    let mut pts = Vec::with_capacity(total);
    let ring = total / 10;
    for (r, nudge) in [(1.0 / a, 1.0 + 1e-9), (1.0 / (a * a), 1.0 - 1e-9)] {
        pts.extend(cp1_brownian::moebius::chordal_circle(y, r, ring / 2));
        pts.extend(cp1_brownian::moebius::chordal_circle(y, r * nudge, ring / 2));
    }
    pts.push(*y);
    let rest = total - pts.len();
    pts.extend(sphere_grid(rest));
    pts
}
