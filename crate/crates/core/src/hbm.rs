//! Brownian motion on the Poincaré disc.
//!
//! Two simulation routes are provided and cross-checked in the tests:
//!
//! * [`simulate_planar`] runs planar Brownian motion on the Euclidean clock
//!   and [`lift_to_hyperbolic`] accumulates the hyperbolic clock
//!   `dσ = (2/(1−|z|²))² dt` (Lévy's conformal invariance: the trace is the
//!   same, only the clock changes).
//! * [`simulate_hyperbolic`] steps on the hyperbolic clock by moving a small
//!   Gaussian step at 0 to the current point with the disc automorphism
//!   `w ↦ (w + z)/(1 + z̄w)`.
//!
//! Generator conventions: planar BM has generator `½Δ`, hyperbolic BM has
//! generator `½Δ_hyp` for the curvature −1 metric `2|dz|/(1−|z|²)`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moebius::{c, C64};
use crate::rng::{rng, trial_rng, SimRng};
use crate::stats;

/// Largest admissible Euclidean step variance.
pub const MAX_STEP_SCALE: f64 = 1e-3;
/// Default Euclidean step variance.
pub const DEFAULT_STEP_SCALE: f64 = 1e-5;
/// Paths on the whole disc are stopped at this radius.
pub const BOUNDARY_PROXY: f64 = 1.0 - 1e-6;

/// Conformal density of the hyperbolic metric, `2/(1−|z|²)`.
pub fn hyperbolic_density(z: C64) -> f64 {
    2.0 / (1.0 - z.norm_sqr())
}

/// Hyperbolic distance `2 artanh |(z−w)/(1−w̄z)|`.
pub fn hyperbolic_distance(z: C64, w: C64) -> f64 {
    let num = (z - w).norm();
    let den = (c(1.0, 0.0) - w.conj() * z).norm();
    2.0 * (num / den).min(1.0).atanh()
}

/// Hyperbolic distance from the origin.
pub fn distance_from_origin(z: C64) -> f64 {
    2.0 * z.norm().min(1.0).atanh()
}

/// Disc automorphism `u ↦ (u + a)/(1 + āu)` sending 0 to `a`.
pub fn disc_translate(a: C64, u: C64) -> C64 {
    (u + a) / (c(1.0, 0.0) + a.conj() * u)
}

/// Euclidean radius of the hyperbolic disc of radius `rho` about 0.
pub fn euclid_radius(rho: f64) -> f64 {
    (rho / 2.0).tanh()
}

/// The hyperbolic disc `D_hyp(center, rho)` as a Euclidean disc
/// `(center', radius')`.
pub fn hyperbolic_disc_as_euclid(center: C64, rho: f64) -> (C64, f64) {
    let r = euclid_radius(rho);
    let dir = if center.norm() > 0.0 { center / center.norm() } else { c(1.0, 0.0) };
    let e1 = disc_translate(center, dir * r);
    let e2 = disc_translate(center, -dir * r);
    ((e1 + e2) / 2.0, (e1 - e2).norm() / 2.0)
}

/// Stopping rules, written in config files as `{kind, ...}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopRule {
    /// Exit of the open Euclidean disc `D(center, radius)`.
    ExitDisc { center: C64, radius: f64 },
    /// Fixed Euclidean time.
    EuclidTime { t: f64 },
    /// Fixed hyperbolic time.
    HyperTime { t: f64 },
    /// Hitting the closed Euclidean disc `D(center, radius)`.
    HitDisc { center: C64, radius: f64 },
    /// Hitting `|z| = inner` or `|z| = outer`.
    Annulus { inner: f64, outer: f64 },
    /// Reaching the boundary proxy `|z| = 1 − 1e−6`.
    Boundary,
}

/// Piecewise-linear sampled trace on the Euclidean clock.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarPath {
    pub times: Vec<f64>,
    pub points: Vec<C64>,
    pub step_scale: f64,
    /// The last point was projected onto the stopping boundary.
    pub stopped_at_exit: bool,
}

impl PlanarPath {
    pub fn end(&self) -> C64 {
        *self.points.last().expect("paths are nonempty")
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("paths are nonempty")
    }
}

/// Euclidean and hyperbolic clocks sampled at the same instants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeChange {
    pub euclid_times: Vec<f64>,
    pub hyper_times: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HyperbolicPath {
    pub trace: PlanarPath,
    pub clock: TimeChange,
}

impl HyperbolicPath {
    pub fn horizon(&self) -> f64 {
        *self.clock.hyper_times.last().expect("nonempty")
    }

    pub fn points(&self) -> &[C64] {
        &self.trace.points
    }

    pub fn hyper_times(&self) -> &[f64] {
        &self.clock.hyper_times
    }

    /// Applies `f` to every point, keeping both clocks. Used for isometries,
    /// which preserve hyperbolic time.
    pub fn map_points<F: Fn(C64) -> C64>(&self, f: F) -> HyperbolicPath {
        let mut out = self.clone();
        for p in out.trace.points.iter_mut() {
            *p = f(*p);
        }
        out
    }
}

fn gaussian_pair(r: &mut SimRng) -> (f64, f64) {
    (r.sample(StandardNormal), r.sample(StandardNormal))
}

/// Distance from `z` to the boundary of the stop region, or `None` for
/// time-based rules.
fn boundary_distance(stop: &StopRule, z: C64) -> Option<f64> {
    match *stop {
        StopRule::ExitDisc { center, radius } => Some(radius - (z - center).norm()),
        StopRule::HitDisc { center, radius } => Some((z - center).norm() - radius),
        StopRule::Annulus { inner, outer } => {
            let r = z.norm();
            Some((r - inner).min(outer - r))
        }
        _ => None,
    }
}

/// Streaming planar Euler scheme. Each step has variance `h` per
/// coordinate over Euclidean time `h`, with
/// `h = min(step_scale, 0.1·d²)` where `d` is the distance to the stop
/// boundary (and to the unit circle once within 0.05 of it).
pub struct PlanarStepper {
    pub z: C64,
    pub t: f64,
    pub step_scale: f64,
    stop: StopRule,
    shell: f64,
    pub done: bool,
    pub hit_boundary: bool,
}

impl PlanarStepper {
    pub fn new(start: C64, step_scale: f64, stop: StopRule) -> Result<Self> {
        if !(step_scale > 0.0) {
            return Err(Error::InvalidConfig("step_scale must be positive".into()));
        }
        if step_scale > MAX_STEP_SCALE {
            return Err(Error::StepTooLarge(step_scale));
        }
        if !(start.norm() < 1.0) {
            return Err(Error::StartOutsideDisc(format!("{start}")));
        }
        let mut s = PlanarStepper { z: start, t: 0.0, step_scale, stop, shell: 1e-9, done: false, hit_boundary: false };
        if let Some(d) = boundary_distance(&stop, start) {
            if d <= 0.0 {
                s.done = true;
                s.hit_boundary = true;
            }
        }
        if let StopRule::EuclidTime { t } = stop {
            if t <= 0.0 {
                s.done = true;
            }
        }
        Ok(s)
    }

    /// Stop distance below which the path is declared on the boundary.
    pub fn with_shell(mut self, shell: f64) -> Self {
        self.shell = shell;
        self
    }

    fn step_size(&self) -> f64 {
        let mut h = self.step_scale;
        let edge = 1.0 - self.z.norm();
        if edge < 0.05 {
            h = h.min(0.1 * edge * edge);
        }
        if let Some(d) = boundary_distance(&self.stop, self.z) {
            h = h.min(0.1 * d * d);
        }
        if let StopRule::EuclidTime { t } = self.stop {
            h = h.min(t - self.t);
        }
        // keep the clock strictly increasing in f64
        h.max(4.0 * f64::EPSILON * self.t).max(1e-300)
    }

    /// One step; returns the Euclidean time increment.
    pub fn step(&mut self, r: &mut SimRng) -> f64 {
        if self.done {
            return 0.0;
        }
        let h = self.step_size();
        let (a, b) = gaussian_pair(r);
        let s = h.sqrt();
        let mut next = self.z + c(a * s, b * s);
        self.t += h;
        // boundary handling
        match self.stop {
            StopRule::ExitDisc { center, radius } => {
                let d = (next - center).norm();
                if d >= radius - self.shell {
                    next = center + (next - center) / d * radius;
                    self.done = true;
                    self.hit_boundary = true;
                }
            }
            StopRule::HitDisc { center, radius } => {
                let d = (next - center).norm();
                if d <= radius + self.shell {
                    next = center + (next - center) / d.max(1e-300) * radius;
                    self.done = true;
                    self.hit_boundary = true;
                }
            }
            StopRule::Annulus { inner, outer } => {
                let r = next.norm();
                if r <= inner + self.shell {
                    next = next / r.max(1e-300) * inner;
                    self.done = true;
                    self.hit_boundary = true;
                } else if r >= outer - self.shell {
                    next = next / r * outer;
                    self.done = true;
                    self.hit_boundary = true;
                }
            }
            StopRule::EuclidTime { t } => {
                if self.t >= t * (1.0 - 1e-15) {
                    self.done = true;
                }
            }
            StopRule::HyperTime { .. } | StopRule::Boundary => {}
        }
        let r = next.norm();
        if !self.done && r >= BOUNDARY_PROXY {
            next = next / r * BOUNDARY_PROXY;
            self.done = true;
            self.hit_boundary = true;
        }
        self.z = next;
        h
    }
}

/// Planar Brownian motion stopped by `stop`. Hyperbolic-time stops use the
/// midpoint rule for the clock.
pub fn simulate_planar(start: C64, step_scale: f64, stop: StopRule, seed: u64) -> Result<PlanarPath> {
    let mut r = rng(seed);
    simulate_planar_with(start, step_scale, stop, &mut r)
}

pub fn simulate_planar_with(start: C64, step_scale: f64, stop: StopRule, r: &mut SimRng) -> Result<PlanarPath> {
    let mut st = PlanarStepper::new(start, step_scale, stop)?;
    let mut times = vec![0.0];
    let mut points = vec![start];
    let hyper_limit = if let StopRule::HyperTime { t } = stop { Some(t) } else { None };
    let mut hyper = 0.0;
    if let Some(t) = hyper_limit {
        if t <= 0.0 {
            st.done = true;
        }
    }
    while !st.done {
        let z0 = st.z;
        let h = st.step(r);
        if let Some(limit) = hyper_limit {
            let mid = (z0 + st.z) / 2.0;
            hyper += h * hyperbolic_density(mid).powi(2);
            if hyper >= limit {
                st.done = true;
            }
        }
        times.push(st.t);
        points.push(st.z);
    }
    Ok(PlanarPath { times, points, step_scale, stopped_at_exit: st.hit_boundary })
}

/// Adds the hyperbolic clock to a planar trace (midpoint rule).
pub fn lift_to_hyperbolic(path: &PlanarPath) -> HyperbolicPath {
    let mut hyper_times = Vec::with_capacity(path.times.len());
    hyper_times.push(0.0);
    let mut acc = 0.0;
    for i in 1..path.times.len() {
        let dt = path.times[i] - path.times[i - 1];
        let mid = (path.points[i] + path.points[i - 1]) / 2.0;
        acc += dt * hyperbolic_density(mid).powi(2);
        hyper_times.push(acc);
    }
    HyperbolicPath {
        trace: path.clone(),
        clock: TimeChange { euclid_times: path.times.clone(), hyper_times },
    }
}

/// One hyperbolic step of duration `dtau` from `z`.
#[inline]
pub fn hyperbolic_step(z: C64, dtau: f64, r: &mut SimRng) -> C64 {
    let (a, b) = gaussian_pair(r);
    // At 0 the metric density is 2, so the Euclidean variance is dtau/4.
    let s = (dtau / 4.0).sqrt();
    disc_translate(z, c(a * s, b * s))
}

/// Hyperbolic BM on the hyperbolic clock with step `dtau`, stopped by
/// `stop` (hyperbolic time, Euclidean disc exit/hit, or the boundary proxy).
/// The Euclidean clock is accumulated with the inverse time change.
pub fn simulate_hyperbolic(start: C64, dtau: f64, stop: StopRule, seed: u64) -> Result<HyperbolicPath> {
    let mut r = rng(seed);
    simulate_hyperbolic_with(start, dtau, stop, &mut r)
}

pub fn simulate_hyperbolic_with(start: C64, dtau: f64, stop: StopRule, r: &mut SimRng) -> Result<HyperbolicPath> {
    if !(start.norm() < 1.0) {
        return Err(Error::StartOutsideDisc(format!("{start}")));
    }
    if !(dtau > 0.0) {
        return Err(Error::InvalidConfig("dtau must be positive".into()));
    }
    let mut points = vec![start];
    let mut hyper = vec![0.0];
    let mut euclid = vec![0.0];
    let mut z = start;
    let (mut tau, mut t) = (0.0, 0.0);
    let mut exited = false;
    let limit = match stop {
        StopRule::HyperTime { t } => t,
        _ => f64::INFINITY,
    };
    let euclid_limit = match stop {
        StopRule::EuclidTime { t } => t,
        _ => f64::INFINITY,
    };
    if let Some(d) = boundary_distance(&stop, z) {
        if d <= 0.0 {
            exited = true;
        }
    }
    while !exited && tau < limit * (1.0 - 1e-12) && t < euclid_limit {
        let step = dtau.min(limit - tau);
        let mut next = hyperbolic_step(z, step, r);
        match stop {
            StopRule::ExitDisc { center, radius } => {
                let d = (next - center).norm();
                if d >= radius {
                    next = center + (next - center) / d * radius;
                    exited = true;
                }
            }
            StopRule::HitDisc { center, radius } => {
                let d = (next - center).norm();
                if d <= radius {
                    next = center + (next - center) / d.max(1e-300) * radius;
                    exited = true;
                }
            }
            StopRule::Annulus { inner, outer } => {
                let rr = next.norm();
                if rr <= inner {
                    next = next / rr.max(1e-300) * inner;
                    exited = true;
                } else if rr >= outer {
                    next = next / rr * outer;
                    exited = true;
                }
            }
            _ => {}
        }
        if next.norm() >= BOUNDARY_PROXY && !exited {
            next = next / next.norm() * BOUNDARY_PROXY;
            exited = true;
        }
        let mid = (z + next) / 2.0;
        let rate = ((1.0 - mid.norm_sqr()) / 2.0).powi(2);
        tau += step;
        t += step * rate;
        z = next;
        points.push(z);
        hyper.push(tau);
        euclid.push(t);
    }
    Ok(HyperbolicPath {
        trace: PlanarPath { times: euclid.clone(), points, step_scale: dtau, stopped_at_exit: exited },
        clock: TimeChange { euclid_times: euclid, hyper_times: hyper },
    })
}

/// Poisson kernel of the disc `|z| < R`: `(R² − |x|²)/(2πR|x − z|²)`.
pub fn poisson_density(x: C64, z: C64, radius: f64) -> f64 {
    (radius * radius - x.norm_sqr()) / (TAU * radius * (x - z).norm_sqr())
}

/// Exit point of `D_hyp(center, hyper_radius)` for Brownian motion from `x`.
pub fn exit_point_sample(x: C64, center: C64, hyper_radius: f64, r: &mut SimRng) -> Result<C64> {
    if !(hyper_radius > 0.0) || !(hyperbolic_distance(x, center) < hyper_radius) {
        return Err(Error::OutsideDisc(format!("{x} is not inside D_hyp({center}, {hyper_radius})")));
    }
    let rr = euclid_radius(hyper_radius);
    let local = disc_translate(-center, x);
    let theta: f64 = r.random_range(0.0..TAU);
    let w = rr * disc_translate(local / rr, C64::from_polar(1.0, theta));
    Ok(disc_translate(center, w))
}

/// CDF on `[−π, π)` of the exit angle from `|z| < 1` started at `x`.
pub fn harmonic_angle_cdf(x: C64, theta: f64) -> f64 {
    // The exit law is the image of the uniform law under u ↦ (u+x)/(1+x̄u);
    // pull the arc back with the inverse automorphism.
    let back = |t: f64| disc_translate(-x, C64::from_polar(1.0, t)).arg();
    let lo = back(-PI);
    let mut a = back(theta) - lo;
    if a < 0.0 {
        a += TAU;
    }
    if theta >= PI {
        return 1.0;
    }
    (a / TAU).clamp(0.0, 1.0)
}

/// Probability that planar BM from radius `c2` hits `|z| = inner` before
/// `|z| = 1`: `log c2 / log inner`.
pub fn annulus_hitting_probability(c2: f64, inner: f64) -> Result<f64> {
    if !(inner > 0.0 && inner <= c2 && c2 < 1.0) {
        return Err(Error::BadRadii(format!("need 0 < inner <= c2 < 1, got inner = {inner}, c2 = {c2}")));
    }
    Ok(c2.ln() / inner.ln())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Monte Carlo version of [`annulus_hitting_probability`].
pub fn annulus_hitting_mc(c2: f64, inner: f64, paths: usize, step_scale: f64, seed: u64) -> Result<McEstimate> {
    annulus_hitting_probability(c2, inner)?;
    let hits: usize = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut r = trial_rng(seed, i as u64);
            let mut st = PlanarStepper::new(c(c2, 0.0), step_scale, StopRule::Annulus { inner, outer: 1.0 })
                .expect("validated")
                .with_shell(1e-7);
            while !st.done {
                st.step(&mut r);
            }
            usize::from(st.z.norm() < 0.5 * (inner + 1.0))
        })
        .sum();
    let (p, se) = stats::proportion(hits, paths);
    Ok(McEstimate { mean: p, std_err: se, samples: paths })
}

/// Green function of `½Δ` on the unit disc with pole at 0.
pub fn green_function(z: C64) -> f64 {
    -z.norm().ln() / PI
}

/// Hyperbolic area density `4/(1−|z|²)²`.
pub fn hyperbolic_area_density(z: C64) -> f64 {
    hyperbolic_density(z).powi(2)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GreenOccupation {
    pub mc_estimate: f64,
    pub mc_std_err: f64,
    pub quadrature_value: f64,
    /// The disc contains the pole; the quadrature is then done in polar
    /// coordinates about 0.
    pub pole_inside: bool,
    pub quadrature_cells: usize,
}

/// Midpoint rule in polar coordinates about `origin` over the Euclidean disc
/// `D(center, radius)`, which must contain `origin`.
fn polar_quadrature<F: Fn(C64) -> f64>(origin: C64, center: C64, radius: f64, n: usize, f: &F) -> f64 {
    let off = center - origin;
    let mut total = 0.0;
    for j in 0..n {
        let th = TAU * (j as f64 + 0.5) / n as f64;
        let u = C64::from_polar(1.0, th);
        // boundary distance along the ray: |off + s u| = radius
        let b = (off.conj() * u).re;
        let smax = (-b + (b * b - off.norm_sqr() + radius * radius).max(0.0).sqrt()).max(0.0);
        let ds = smax / n as f64;
        let mut ray = 0.0;
        for i in 0..n {
            let s = (i as f64 + 0.5) * ds;
            ray += f(origin + u * s) * s;
        }
        total += ray * ds;
    }
    total * TAU / n as f64
}

/// `∫_D G(0,z)·4/(1−|z|²)² dA`, refined ×2 from a 400×400 grid until two
/// successive values agree within 0.5%.
pub fn green_quadrature(center: C64, radius: f64) -> (f64, bool, usize) {
    let pole_inside = center.norm() < radius;
    let origin = if pole_inside { c(0.0, 0.0) } else { center };
    let f = |z: C64| green_function(z) * hyperbolic_area_density(z);
    let mut n = 400;
    let mut prev = polar_quadrature(origin, center, radius, n, &f);
    loop {
        n *= 2;
        let next = polar_quadrature(origin, center, radius, n, &f);
        if (next - prev).abs() <= 0.005 * next.abs() || n >= 3200 {
            return (next, pole_inside, n);
        }
        prev = next;
    }
}

/// Hyperbolic occupation time of `D_hyp(center, rho)` by hyperbolic BM from
/// 0 killed at `|z| = 1 − 1e−6`, by Monte Carlo and by quadrature of the
/// Green function.
///
/// Paths run planar BM with `h = min(1e−3, 0.1·d_kill², max(1e−5, 0.1·d_disc²))`
/// and accumulate `h·4/(1−|z|²)²` while inside the disc. Killing before the
/// circle drops the occupation after `|z| = 1 − 1e−6`; for a disc at positive
/// distance from the circle that part is zero unless the path returns, which
/// has probability `O(1e−6)`.
pub fn green_occupation(center: C64, rho: f64, samples: usize, seed: u64) -> Result<GreenOccupation> {
    let (ec, er) = hyperbolic_disc_as_euclid(center, rho);
    if (ec.norm() - er).abs() < 1e-6 {
        return Err(Error::PoleOnBoundary);
    }
    let (quadrature_value, pole_inside, cells) = green_quadrature(ec, er);
    let kill = BOUNDARY_PROXY;
    let occ: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut r = trial_rng(seed, i as u64);
            let mut z = c(0.0, 0.0);
            let mut acc = 0.0;
            loop {
                let dk = kill - z.norm();
                let dd = ((z - ec).norm() - er).abs();
                let h = (1e-3f64).min(0.1 * dk * dk).min((1e-5f64).max(0.1 * dd * dd));
                let (a, b) = gaussian_pair(&mut r);
                let s = h.sqrt();
                let next = z + c(a * s, b * s);
                let mid = (z + next) / 2.0;
                if (mid - ec).norm() < er {
                    acc += h * hyperbolic_area_density(mid);
                }
                z = next;
                if z.norm() >= kill {
                    break;
                }
            }
            acc
        })
        .collect();
    Ok(GreenOccupation {
        mc_estimate: stats::mean(&occ),
        mc_std_err: stats::std_err(&occ),
        quadrature_value,
        pole_inside,
        quadrature_cells: cells,
    })
}

/// Closed form of the Green integral over the concentric disc `|z| < a`:
/// `−2(a² log a²/(1−a²) + log(1−a²))`.
pub fn green_integral_concentric(a: f64) -> f64 {
    let u = a * a;
    -2.0 * (u * u.ln() / (1.0 - u) + (1.0 - u).ln())
}

/// `sup_{s ≤ t} d(ω(0), ω(s))` on the hyperbolic clock.
pub fn sup_displacement(path: &HyperbolicPath, t: f64) -> Result<f64> {
    let horizon = path.horizon();
    if t > horizon * (1.0 + 1e-12) {
        return Err(Error::HorizonExceeded { requested: t, horizon });
    }
    let z0 = path.points()[0];
    let mut best: f64 = 0.0;
    for (p, s) in path.points().iter().zip(path.hyper_times()) {
        if *s > t {
            break;
        }
        best = best.max(hyperbolic_distance(z0, *p));
    }
    Ok(best)
}

/// Running maximum of the distance from the start of a hyperbolic BM over
/// hyperbolic time `t`, without storing the path.
pub fn sup_displacement_sample(t: f64, dtau: f64, r: &mut SimRng) -> f64 {
    let mut z = c(0.0, 0.0);
    let mut best: f64 = 0.0;
    let steps = (t / dtau).round() as usize;
    for _ in 0..steps {
        z = hyperbolic_step(z, dtau, r);
        best = best.max(distance_from_origin(z));
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailFit {
    pub radii: Vec<f64>,
    pub survival: Vec<f64>,
    /// Fitted `c` in `P(ξ ≥ r) ≈ A e^{−c r²}`.
    pub c: f64,
    pub samples: usize,
}

/// Empirical tail of `ξ_1` on `r ∈ [2, 4]` with a least-squares fit of
/// `log P` against `r²`.
pub fn xi_tail_fit(samples: usize, dtau: f64, seed: u64) -> TailFit {
    let xs: Vec<f64> =
        (0..samples).into_par_iter().map(|i| sup_displacement_sample(1.0, dtau, &mut trial_rng(seed, i as u64))).collect();
    let radii: Vec<f64> = (0..=8).map(|i| 2.0 + 0.25 * i as f64).collect();
    let survival: Vec<f64> =
        radii.iter().map(|r| xs.iter().filter(|x| **x >= *r).count() as f64 / samples as f64).collect();
    let pts: Vec<(f64, f64)> =
        radii.iter().zip(&survival).filter(|(_, p)| **p > 0.0).map(|(r, p)| (r * r, p.ln())).collect();
    let c = if pts.len() >= 2 {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        -stats::linear_fit(&x, &y).slope
    } else {
        f64::NAN
    };
    TailFit { radii, survival, c, samples }
}

/// Hyperbolic metric density `1/y` on the upper half-plane.
pub fn half_plane_hyperbolic_density(z: C64) -> f64 {
    1.0 / z.im
}

/// Spherical metric density `1/(1+|z|²)`.
pub fn spherical_density(z: C64) -> f64 {
    1.0 / (1.0 + z.norm_sqr())
}

/// `ds_hyp/ds_sph = (1+x²+y²)/y` on the upper half-plane.
pub fn half_plane_metric_ratio(z: C64) -> f64 {
    (1.0 + z.re * z.re + z.im * z.im) / z.im
}

/// Writes `euclid_time,hyper_time,re,im`.
pub fn write_path_csv<W: Write>(path: &HyperbolicPath, out: W) -> Result<()> {
    let mut w = crate::csv_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["euclid_time", "hyper_time", "re", "im"]).map_err(io)?;
    for i in 0..path.points().len() {
        let p = path.points()[i];
        w.write_record([
            path.clock.euclid_times[i].to_string(),
            path.clock.hyper_times[i].to_string(),
            p.re.to_string(),
            p.im.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
