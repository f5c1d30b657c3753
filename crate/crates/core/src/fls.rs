//! Furstenberg–Lyons–Sullivan discretization of hyperbolic Brownian motion
//! relative to the orbit `Γ·0` of the level-2 congruence group.
//!
//! The balls are `F_X = X·D̄(0,δ)` and `V_X = X·D(0,δ′)`. From a start in
//! `V_Id` the recursion is
//!
//! ```text
//! S₀ = first exit of V_Id
//! Rₙ = first entry into ∪F_X after Sₙ₋₁,  ω(Rₙ) ∈ F_{Xₙ}
//! Sₙ = first exit of V_{Xₙ} after Rₙ
//! κₙ = (1/C)·(dε_{Xₙ·0}/dε_{ω(Rₙ)})(ω(Sₙ))
//! N_k = first n > N_{k−1} with αₙ < κₙ
//! ```
//!
//! and `X_{N_k}` is a right random walk on the group.
//!
//! Two drivers share the bookkeeping in [`FlsMachine`]: [`simulate_fls`]
//! runs Brownian motion in a moving frame (the point is kept in the
//! Dirichlet domain of `0` and the frame word absorbs the deck
//! transformations), and [`discretize`] reads a path given in global disc
//! coordinates and finds the balls through the bucketed orbit index.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuchsian::{FuchsianGroupModel, Word};
use crate::hbm::{euclid_radius, hyperbolic_step, HyperbolicPath};
use crate::moebius::{c, MoebiusMap, C64};
use crate::rng::{derive_seed, rng, SimRng};
use crate::stats::{chi_square_homogeneity, linear_fit, mean, std_err, ChiSquareResult};

pub const DEFAULT_DELTA: f64 = 0.15;
pub const DEFAULT_DELTA_PRIME: f64 = 0.35;
/// Cap on hyperbolic time spent between `Sₙ₋₁` and `Rₙ`.
pub const DEFAULT_TIME_CAP: f64 = 1e4;

/// `sup P(x,z)/P(y,z)` over `x, y ∈ D̄(0,r)`, `z ∈ ∂D(0,R)`, with
/// `r = tanh(δ/2)`, `R = tanh(δ′/2)` and `P` the Poisson kernel of `D(0,R)`.
///
/// For fixed `z` the kernel is largest at `x = r·z/R` and smallest at
/// `x = −r·z/R`, giving `((R + r)/(R − r))²`.
pub fn harnack_constant(delta: f64, delta_prime: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < delta_prime && delta_prime.is_finite()) {
        return Err(Error::BadRadii(format!("need 0 < delta < delta_prime, got {delta}, {delta_prime}")));
    }
    let r = euclid_radius(delta);
    let big = euclid_radius(delta_prime);
    Ok(((big + r) / (big - r)).powi(2))
}

/// `(1/C)·P(0,w)/P(x,w)` on `∂D(0,R)`, the acceptance weight for an
/// entry at `x` and an exit at `w` in the frame where the ball is centered.
#[inline]
pub fn kappa(x: C64, w: C64, big_r: f64, harnack_c: f64) -> f64 {
    (w - x).norm_sqr() / (big_r * big_r - x.norm_sqr()) / harnack_c
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FLSConfig {
    pub delta: f64,
    pub delta_prime: f64,
    pub harnack_c: f64,
    #[serde(default = "default_time_cap")]
    pub time_cap: f64,
}

fn default_time_cap() -> f64 {
    DEFAULT_TIME_CAP
}

impl FLSConfig {
    /// Validates `0 < δ < δ′ < m₀/2` against the model and fills in `C`.
    pub fn new(delta: f64, delta_prime: f64, model: &FuchsianGroupModel) -> Result<Self> {
        let m0 = model
            .m0
            .ok_or_else(|| Error::InvalidFlsConfig("the orbit index has no non-identity word".into()))?;
        if !(delta > 0.0 && delta < delta_prime) {
            return Err(Error::InvalidFlsConfig(format!("need 0 < delta < delta_prime, got {delta}, {delta_prime}")));
        }
        if delta_prime >= m0 / 2.0 {
            return Err(Error::InvalidFlsConfig(format!("delta_prime {delta_prime} must be below m0/2 = {}", m0 / 2.0)));
        }
        Ok(FLSConfig { delta, delta_prime, harnack_c: harnack_constant(delta, delta_prime)?, time_cap: DEFAULT_TIME_CAP })
    }

    pub fn with_time_cap(mut self, cap: f64) -> Self {
        self.time_cap = cap;
        self
    }

    /// Euclidean radii `(r, R)` of `F_Id` and `V_Id`.
    pub fn radii(&self) -> (f64, f64) {
        (euclid_radius(self.delta), euclid_radius(self.delta_prime))
    }

    pub fn validate(&self, model: &FuchsianGroupModel) -> Result<()> {
        let fresh = FLSConfig::new(self.delta, self.delta_prime, model)?;
        if (fresh.harnack_c - self.harnack_c).abs() > 1e-9 * fresh.harnack_c {
            return Err(Error::InvalidFlsConfig(format!(
                "harnack_c {} does not match the radii (expected {})",
                self.harnack_c, fresh.harnack_c
            )));
        }
        if !(self.time_cap > 0.0) {
            return Err(Error::InvalidFlsConfig("time_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct DiscretizationRecord {
    pub base: Word,
    /// `S₀`.
    pub s0: f64,
    /// `(Sₙ, Rₙ)` for `n ≥ 1`.
    pub stop_times: Vec<(f64, f64)>,
    /// `Xₙ` for `n ≥ 1`.
    pub visited: Vec<Word>,
    pub kappas: Vec<f64>,
    pub coins: Vec<f64>,
    /// `N_k` for `k ≥ 1` (1-based indices into `visited`).
    pub accepted: Vec<usize>,
    /// `X_{N_k}` for `k ≥ 1`.
    pub discrete_walk: Vec<Word>,
    /// `S_{N_k}` for `k ≥ 1`.
    pub discrete_times: Vec<f64>,
    pub harnack_c: f64,
    /// Hyperbolic time reached.
    pub horizon: f64,
    pub truncated: Option<String>,
}

impl DiscretizationRecord {
    /// Increments `γ_{N_k} = X_{N_{k−1}}⁻¹X_{N_k}`, with `X_{N_0} = base`.
    pub fn increments(&self) -> Vec<Word> {
        let mut prev = self.base.clone();
        self.discrete_walk
            .iter()
            .map(|x| {
                let g = prev.inverse().mul(x);
                prev = x.clone();
                g
            })
            .collect()
    }

    /// Times `R_n`.
    pub fn r_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.stop_times.iter().map(|p| p.1)
    }

    /// Checks time ordering, the range of `κₙ` and the acceptance rule.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let c = self.harnack_c;
        let mut last = self.s0;
        for (n, &(s, r)) in self.stop_times.iter().enumerate() {
            if !(r > last && s > r) {
                return Err(format!("time ordering broken at n = {}: prev {last}, R {r}, S {s}", n + 1));
            }
            last = s;
        }
        let n = self.stop_times.len();
        if self.visited.len() != n || self.kappas.len() != n || self.coins.len() != n {
            return Err("per-step vectors have different lengths".into());
        }
        for (i, k) in self.kappas.iter().enumerate() {
            if !(*k >= 1.0 / (c * c) * (1.0 - 1e-12) && *k <= 1.0 + 1e-12) {
                return Err(format!("kappa_{} = {k} outside [1/C^2, 1]", i + 1));
            }
        }
        let mut prev = 0usize;
        let mut it = self.accepted.iter().peekable();
        for i in 1..=n {
            let acc = self.coins[i - 1] < self.kappas[i - 1];
            let listed = it.peek() == Some(&&i);
            if acc != listed {
                return Err(format!("acceptance rule broken at n = {i}"));
            }
            if listed {
                it.next();
                if i <= prev {
                    return Err("N_k not increasing".into());
                }
                prev = i;
            }
        }
        if it.next().is_some() {
            return Err("accepted index beyond the visited steps".into());
        }
        if self.discrete_walk.len() != self.accepted.len() || self.discrete_times.len() != self.accepted.len() {
            return Err("discrete walk length mismatch".into());
        }
        for (j, &nk) in self.accepted.iter().enumerate() {
            if self.discrete_walk[j] != self.visited[nk - 1] || self.discrete_times[j] != self.stop_times[nk - 1].0 {
                return Err(format!("X_N{} or S_N{} does not match step {nk}", j + 1, j + 1));
            }
        }
        if self.discrete_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err("discrete times not increasing".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?)
    }
}

/// Hooks called while a discretization runs. The block `c_k` begins at
/// `S_{N_k}`; [`BlockProbe::observe`] receives `X_{N_k}⁻¹·ω(t)`.
pub trait BlockProbe {
    fn start_block(&mut self, _k: usize, _x: &Word, _s_time: f64) {}
    fn observe(&mut self, _tau: f64, _c: C64) {}
    /// Called at each `Rₙ` inside the current block.
    fn mark_r(&mut self) {}
    /// Called at `S_{N_{k+1}}`, after the last observation of the block.
    fn end_block(&mut self, _s_time: f64) {}
    /// Called when the run stops with a block still open.
    fn abandon_block(&mut self) {}
}

pub struct NoProbe;
impl BlockProbe for NoProbe {}

/// Source of the coins `αₙ`.
pub enum CoinSource {
    Random(SimRng),
    /// Every coin takes this value.
    Forced(f64),
}

impl CoinSource {
    pub fn seeded(seed: u64) -> Self {
        CoinSource::Random(rng(seed))
    }

    fn draw(&mut self) -> f64 {
        match self {
            CoinSource::Random(r) => r.random::<f64>(),
            CoinSource::Forced(v) => *v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    InitialV,
    Seeking,
    InV,
}

/// What a driver must report for the next sample.
pub enum Observation {
    /// Still in the current `V` ball, at this local point (frame of `Xₙ`).
    Inside(C64),
    /// Left the current `V` ball; first outside local point.
    Outside(C64),
    /// Seeking: entered `F_X` at this local point (frame of `X`).
    EnteredF(Word, C64),
    /// Seeking: not in any `F` ball.
    Away,
}

/// Bookkeeping of the recursion, independent of how balls are detected.
pub struct FlsMachine {
    pub record: DiscretizationRecord,
    pub phase: Phase,
    current: Word,
    entry: C64,
    last_inside: C64,
    last_s: f64,
    big_r: f64,
    open_block: bool,
}

impl FlsMachine {
    pub fn new(cfg: &FLSConfig, base: Word, start_local: C64) -> Self {
        let (_, big_r) = cfg.radii();
        FlsMachine {
            record: DiscretizationRecord { base: base.clone(), harnack_c: cfg.harnack_c, ..Default::default() },
            phase: Phase::InitialV,
            current: base,
            entry: start_local,
            last_inside: start_local,
            last_s: 0.0,
            big_r,
            open_block: false,
        }
    }

    /// Word of the ball the path is currently in (or last left).
    pub fn current(&self) -> &Word {
        &self.current
    }

    pub fn accepted_count(&self) -> usize {
        self.record.accepted.len()
    }

    pub fn time_since_exit(&self, tau: f64) -> f64 {
        tau - self.last_s
    }

    /// Exit point on `|z| = R` along the segment from the last inside point.
    fn exit_point(&self, out: C64) -> C64 {
        let a = self.last_inside;
        let d = out - a;
        // |a + t d|² = R², t ∈ [0, 1]
        let qa = d.norm_sqr();
        let qb = 2.0 * (a.conj() * d).re;
        let qc = a.norm_sqr() - self.big_r * self.big_r;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        let t = if qa > 0.0 { ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0) } else { 1.0 };
        let w = a + d * t;
        w / w.norm() * self.big_r
    }

    /// Advances by one sample at hyperbolic time `tau`.
    pub fn feed(&mut self, tau: f64, obs: Observation, coins: &mut CoinSource, probe: &mut dyn BlockProbe) {
        match (self.phase, obs) {
            (Phase::InitialV, Observation::Inside(z)) | (Phase::InV, Observation::Inside(z)) => {
                self.last_inside = z;
            }
            (Phase::InitialV, Observation::Outside(_)) => {
                self.record.s0 = tau;
                self.last_s = tau;
                self.phase = Phase::Seeking;
                probe.start_block(0, &self.record.base, tau);
                self.open_block = true;
            }
            (Phase::InV, Observation::Outside(z)) => {
                let w = self.exit_point(z);
                let kappa_n = kappa(self.entry, w, self.big_r, self.record.harnack_c);
                let alpha = coins.draw();
                let r_n = self.record.stop_times.last().map(|p| p.1).expect("R_n recorded");
                *self.record.stop_times.last_mut().expect("R_n recorded") = (tau, r_n);
                self.record.kappas.push(kappa_n);
                self.record.coins.push(alpha);
                self.last_s = tau;
                self.phase = Phase::Seeking;
                if alpha < kappa_n {
                    let n = self.record.visited.len();
                    let k = self.record.accepted.len() + 1;
                    self.record.accepted.push(n);
                    self.record.discrete_walk.push(self.current.clone());
                    self.record.discrete_times.push(tau);
                    probe.end_block(tau);
                    probe.start_block(k, &self.current, tau);
                    self.open_block = true;
                }
            }
            (Phase::Seeking, Observation::EnteredF(x, z)) => {
                self.record.stop_times.push((f64::NAN, tau));
                self.record.visited.push(x.clone());
                self.current = x;
                self.entry = z;
                self.last_inside = z;
                self.phase = Phase::InV;
                probe.mark_r();
            }
            (Phase::Seeking, Observation::Away) => {}
            (phase, _) => panic!("observation does not match phase {phase:?}"),
        }
        self.record.horizon = tau;
    }

    /// Drops an unfinished step (an `Rₙ` without `Sₙ`) and closes the run.
    pub fn finish(mut self, probe: &mut dyn BlockProbe, truncated: Option<String>) -> DiscretizationRecord {
        if self.phase == Phase::InV {
            self.record.stop_times.pop();
            self.record.visited.pop();
        }
        if self.open_block {
            probe.abandon_block();
        }
        self.record.truncated = truncated;
        self.record
    }
}

/// When a framed simulation stops.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlsStop {
    /// Stop at `S_{N_k}` for this `k`.
    pub accepted: usize,
    /// Hard limit on hyperbolic time.
    pub horizon: f64,
}

/// Framed simulation output; `trace` holds global samples when requested.
pub struct FlsRun {
    pub record: DiscretizationRecord,
    pub trace: Option<HyperbolicPath>,
}

/// Simulates hyperbolic Brownian motion from `start` (in `V_Id`) with step
/// `dtau`, discretizing on the fly. The point is kept in the Dirichlet
/// domain of `0` and the deck transformations go into the frame word.
#[allow(clippy::too_many_arguments)]
pub fn simulate_fls(
    model: &FuchsianGroupModel,
    cfg: &FLSConfig,
    start: C64,
    dtau: f64,
    stop: FlsStop,
    path_rng: &mut SimRng,
    coins: &mut CoinSource,
    probe: &mut dyn BlockProbe,
    keep_trace: bool,
) -> Result<FlsRun> {
    let (r_small, big_r) = cfg.radii();
    if !(start.norm() < big_r) {
        return Err(Error::StartOutsideV { dist: crate::hbm::distance_from_origin(start), delta_prime: cfg.delta_prime });
    }
    if !(dtau > 0.0) {
        return Err(Error::InvalidConfig("dtau must be positive".into()));
    }
    let mut m = FlsMachine::new(cfg, Word::identity(), start);
    let mut frame = Word::identity();
    // X_{N_k}⁻¹·frame for the open block
    let mut block = MoebiusMap::identity();
    let mut block_base = Word::identity();
    let mut z = start;
    let mut tau = 0.0;
    let mut trace = keep_trace.then(|| (vec![start], vec![0.0]));
    let mut truncated = None;
    let mut frame_map = MoebiusMap::identity();
    let mut observe_block = false;

    struct Tee<'a> {
        inner: &'a mut dyn BlockProbe,
        started: Option<Word>,
    }
    impl BlockProbe for Tee<'_> {
        fn start_block(&mut self, k: usize, x: &Word, s: f64) {
            self.started = Some(x.clone());
            self.inner.start_block(k, x, s);
        }
        fn observe(&mut self, tau: f64, c: C64) {
            self.inner.observe(tau, c)
        }
        fn mark_r(&mut self) {
            self.inner.mark_r()
        }
        fn end_block(&mut self, s: f64) {
            self.inner.end_block(s)
        }
        fn abandon_block(&mut self) {
            self.inner.abandon_block()
        }
    }
    let mut tee = Tee { inner: probe, started: None };

    while m.accepted_count() < stop.accepted && tau < stop.horizon {
        z = hyperbolic_step(z, dtau, path_rng);
        tau += dtau;
        if !(z.norm() < 1.0 - 1e-15) {
            truncated = Some(Error::OrbitCoverageExceeded("path reached the circle in local coordinates".into()).to_string());
            break;
        }
        let mut moved = Word::identity();
        if model.recenter(&mut moved, &mut z) {
            let g = model.word_map(&moved);
            frame = frame.mul(&moved);
            block = block.compose(&g);
            if keep_trace {
                frame_map = frame_map.compose(&g);
            }
        }
        if let Some((pts, ts)) = trace.as_mut() {
            pts.push(frame_map.apply_affine(z).expect("disc point"));
            ts.push(tau);
        }
        if observe_block {
            tee.observe(tau, block.apply_affine(z).expect("disc point"));
        }
        let obs = match m.phase {
            Phase::InitialV | Phase::InV => {
                let local = if &frame == m.current() {
                    z
                } else {
                    model.word_map(&m.current().inverse().mul(&frame)).apply_affine(z).expect("disc point")
                };
                if local.norm() < big_r {
                    Observation::Inside(local)
                } else {
                    Observation::Outside(local)
                }
            }
            Phase::Seeking => {
                if m.time_since_exit(tau) > cfg.time_cap {
                    truncated = Some(
                        Error::OrbitCoverageExceeded(format!("no entry into F within {} time units", cfg.time_cap))
                            .to_string(),
                    );
                    break;
                }
                if z.norm() <= r_small {
                    Observation::EnteredF(frame.clone(), z)
                } else {
                    Observation::Away
                }
            }
        };
        m.feed(tau, obs, coins, &mut tee);
        if let Some(x) = tee.started.take() {
            // a block starts at this sample
            block_base = x;
            block = model.word_map(&block_base.inverse().mul(&frame));
            observe_block = true;
            tee.observe(tau, block.apply_affine(z).expect("disc point"));
        }
    }
    let _ = block_base;
    let record = m.finish(&mut tee, truncated);
    let trace = trace.map(|(points, ts)| HyperbolicPath {
        trace: crate::hbm::PlanarPath { times: ts.clone(), points, step_scale: dtau, stopped_at_exit: false },
        clock: crate::hbm::TimeChange { euclid_times: ts.clone(), hyper_times: ts },
    });
    debug_assert!(record.check_invariants().is_ok(), "{:?}", record.check_invariants());
    if let Err(e) = record.check_invariants() {
        return Err(Error::InvalidConfig(format!("discretization invariant failed: {e}")));
    }
    Ok(FlsRun { record, trace })
}

/// Convenience wrapper: path and coin streams derived from `seed`.
pub fn simulate_fls_seeded(
    model: &FuchsianGroupModel,
    cfg: &FLSConfig,
    dtau: f64,
    stop: FlsStop,
    seed: u64,
    probe: &mut dyn BlockProbe,
) -> Result<DiscretizationRecord> {
    let mut path_rng = rng(derive_seed(seed, 0));
    let mut coins = CoinSource::seeded(derive_seed(seed, 1));
    Ok(simulate_fls(model, cfg, c(0.0, 0.0), dtau, stop, &mut path_rng, &mut coins, probe, false)?.record)
}

/// Discretizes a path given in global disc coordinates, starting in `V_Id`.
pub fn discretize(
    path: &HyperbolicPath,
    model: &FuchsianGroupModel,
    cfg: &FLSConfig,
    seed: u64,
) -> Result<DiscretizationRecord> {
    discretize_with(path, model, cfg, &Word::identity(), &mut CoinSource::seeded(seed), &mut NoProbe)
}

/// Discretizes a global path starting in `V_base`. Balls are found with
/// the orbit index; the run is truncated once the path nears the edge of
/// the indexed orbit.
pub fn discretize_with(
    path: &HyperbolicPath,
    model: &FuchsianGroupModel,
    cfg: &FLSConfig,
    base: &Word,
    coins: &mut CoinSource,
    probe: &mut dyn BlockProbe,
) -> Result<DiscretizationRecord> {
    cfg.validate(model)?;
    let (_, big_r) = cfg.radii();
    let pts = path.points();
    let ts = path.hyper_times();
    let base_inv = model.word_map(base).inverse();
    let start_local = base_inv.apply_affine(pts[0]).expect("disc point");
    if !(start_local.norm() < big_r) {
        return Err(Error::StartOutsideV {
            dist: crate::hbm::distance_from_origin(start_local),
            delta_prime: cfg.delta_prime,
        });
    }
    let mut m = FlsMachine::new(cfg, base.clone(), start_local);
    let mut current_inv = base_inv;
    let mut current_word = base.clone();
    let mut truncated = None;
    let edge = model.word_radius.saturating_sub(1);
    for i in 1..pts.len() {
        let (tau, z) = (ts[i], pts[i]);
        if m.phase == Phase::Seeking && m.time_since_exit(tau) > cfg.time_cap {
            truncated =
                Some(Error::OrbitCoverageExceeded(format!("no entry into F within {} time units", cfg.time_cap)).to_string());
            break;
        }
        let obs = match m.phase {
            Phase::InitialV | Phase::InV => {
                if m.current() != &current_word {
                    current_word = m.current().clone();
                    current_inv = model.word_map(&current_word).inverse();
                }
                let local = current_inv.apply_affine(z).expect("disc point");
                if local.norm() < big_r {
                    Observation::Inside(local)
                } else {
                    Observation::Outside(local)
                }
            }
            Phase::Seeking => {
                // coverage: word of the Dirichlet domain holding z
                let mut w = Word::identity();
                let mut zz = z;
                model.recenter(&mut w, &mut zz);
                if w.len() >= edge {
                    truncated = Some(
                        Error::OrbitCoverageExceeded(format!(
                            "path reached word length {} with index radius {}",
                            w.len(),
                            model.word_radius
                        ))
                        .to_string(),
                    );
                    break;
                }
                match model.orbit_points_within(z, cfg.delta * (1.0 + 1e-12)).first() {
                    Some(&(idx, _)) => {
                        let x = model.orbit_index[idx].word.clone();
                        let local = model.word_map(&x).inverse().apply_affine(z).expect("disc point");
                        Observation::EnteredF(x, local)
                    }
                    None => Observation::Away,
                }
            }
        };
        m.feed(tau, obs, coins, probe);
    }
    let record = m.finish(probe, truncated);
    record.check_invariants().map_err(|e| Error::InvalidConfig(format!("discretization invariant failed: {e}")))?;
    Ok(record)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlopeEstimate {
    /// Mean over records of the least-squares slope of `S_{N_k}` on `k`.
    pub slope: f64,
    pub std_err: f64,
    pub records: usize,
    pub k_max: usize,
    /// Standard error using only the first half of the records.
    pub std_err_half: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteWalkReport {
    pub records: usize,
    pub increments_total: usize,
    pub iid_chi_square: ChiSquareResult,
    pub time_slope: SlopeEstimate,
    /// Mean of `d(0, γ_{N_1}·0)` and its standard error.
    pub first_step_displacement: f64,
    pub first_step_displacement_se: f64,
    /// Running mean of the same quantity at the quartiles of the sample.
    pub displacement_running_mean: Vec<f64>,
    /// Distinct first-step words seen within the first `n` records.
    pub support_growth: Vec<(usize, usize)>,
    /// Empirical law of the first increment, most frequent first.
    pub first_step_law: Vec<(String, usize)>,
    pub truncated_records: usize,
}

/// Position-1 vs position-2 homogeneity, time slope and first moment.
pub fn discrete_walk_statistics(
    records: &[DiscretizationRecord],
    model: &FuchsianGroupModel,
    min_accepted: usize,
) -> Result<DiscreteWalkReport> {
    let min_accepted = min_accepted.max(2);
    let usable: Vec<&DiscretizationRecord> = records.iter().filter(|r| r.accepted.len() >= min_accepted).collect();
    if usable.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} records with at least {min_accepted} accepted steps",
            usable.len()
        )));
    }
    let incs: Vec<Vec<Word>> = usable.iter().map(|r| r.increments()).collect();
    let mut cats: HashMap<String, usize> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for inc in &incs {
        for w in inc.iter().take(2) {
            let s = w.to_string();
            if !cats.contains_key(&s) {
                cats.insert(s.clone(), order.len());
                order.push(s);
            }
        }
    }
    let mut a = vec![0u64; order.len()];
    let mut b = vec![0u64; order.len()];
    for inc in &incs {
        a[cats[&inc[0].to_string()]] += 1;
        b[cats[&inc[1].to_string()]] += 1;
    }
    let iid_chi_square = chi_square_homogeneity(&a, &b);

    let k_max = min_accepted;
    let slopes: Vec<f64> = usable
        .iter()
        .map(|r| {
            let ks: Vec<f64> = (1..=k_max).map(|k| k as f64).collect();
            linear_fit(&ks, &r.discrete_times[..k_max]).slope
        })
        .collect();
    let half = &slopes[..slopes.len() / 2];
    let time_slope = SlopeEstimate {
        slope: mean(&slopes),
        std_err: std_err(&slopes),
        records: slopes.len(),
        k_max,
        std_err_half: if half.len() >= 2 { std_err(half) } else { f64::NAN },
    };

    let disp: Vec<f64> = incs
        .iter()
        .map(|inc| crate::hbm::distance_from_origin(model.word_map(&inc[0]).apply_affine(c(0.0, 0.0)).expect("finite")))
        .collect();
    let running = [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|q| {
            let n = ((disp.len() as f64 * q) as usize).max(1);
            mean(&disp[..n])
        })
        .collect();
    let mut seen = std::collections::HashSet::new();
    let mut support_growth = Vec::new();
    let mut next_mark = 1usize;
    for (i, inc) in incs.iter().enumerate() {
        seen.insert(inc[0].to_string());
        if i + 1 == next_mark || i + 1 == incs.len() {
            support_growth.push((i + 1, seen.len()));
            next_mark *= 2;
        }
    }
    let mut law: HashMap<String, usize> = HashMap::new();
    for inc in &incs {
        *law.entry(inc[0].to_string()).or_default() += 1;
    }
    let mut first_step_law: Vec<(String, usize)> = law.into_iter().collect();
    first_step_law.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));

    Ok(DiscreteWalkReport {
        records: usable.len(),
        increments_total: incs.iter().map(|v| v.len()).sum(),
        iid_chi_square,
        time_slope,
        first_step_displacement: mean(&disp),
        first_step_displacement_se: std_err(&disp),
        displacement_running_mean: running,
        support_growth,
        first_step_law,
        truncated_records: records.iter().filter(|r| r.truncated.is_some()).count(),
    })
}

/// One CSV row per step `n`: `n,S_n,R_n,X_n,kappa,coin,accepted`.
pub fn write_record_csv<W: Write>(rec: &DiscretizationRecord, out: W) -> Result<()> {
    let mut w = crate::csv_writer(out);
    w.write_record(["n", "s_n", "r_n", "x_n", "kappa", "coin", "accepted"]).map_err(|e| Error::Io(e.to_string()))?;
    for (i, &(s, r)) in rec.stop_times.iter().enumerate() {
        let acc = rec.accepted.binary_search(&(i + 1)).is_ok();
        w.write_record([
            (i + 1).to_string(),
            s.to_string(),
            r.to_string(),
            rec.visited[i].to_string(),
            rec.kappas[i].to_string(),
            rec.coins[i].to_string(),
            acc.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchsian::build_gamma2_model;
    use crate::hbm::{PlanarPath, TimeChange};
    use approx::assert_relative_eq;

    fn path_of(points: Vec<C64>) -> HyperbolicPath {
        let ts: Vec<f64> = (0..points.len()).map(|i| i as f64 * 0.01).collect();
        HyperbolicPath {
            trace: PlanarPath { times: ts.clone(), points, step_scale: 0.01, stopped_at_exit: false },
            clock: TimeChange { euclid_times: ts.clone(), hyper_times: ts },
        }
    }

    fn segment(a: C64, b: C64, n: usize) -> Vec<C64> {
        (1..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
    }

    #[test]
    fn harnack_limits_and_monotonicity() {
        assert_relative_eq!(harnack_constant(1e-9, 0.35).unwrap(), 1.0, epsilon = 1e-7);
        let mut prev = 1.0;
        for d in [0.05, 0.1, 0.15, 0.2, 0.3] {
            let c = harnack_constant(d, 0.35).unwrap();
            assert!(c > prev);
            prev = c;
        }
        assert!(matches!(harnack_constant(0.4, 0.35), Err(Error::BadRadii(_))));
    }

    #[test]
    fn config_checks_against_m0() {
        let model = build_gamma2_model(2).unwrap();
        let cfg = FLSConfig::new(0.15, 0.35, &model).unwrap();
        assert!(cfg.harnack_c >= 1.0);
        assert!(FLSConfig::new(0.15, 0.9, &model).is_err());
        assert!(FLSConfig::new(0.35, 0.15, &model).is_err());
        assert!(FLSConfig::new(0.15, 0.35, &build_gamma2_model(0).unwrap()).is_err());
    }

    #[test]
    fn kappa_at_orbit_point_is_inverse_c() {
        let c_h = harnack_constant(0.15, 0.35).unwrap();
        let (_, big_r) = (euclid_radius(0.15), euclid_radius(0.35));
        for k in 0..16 {
            let w = C64::from_polar(big_r, k as f64 * 0.4);
            assert_relative_eq!(kappa(c(0.0, 0.0), w, big_r, c_h), 1.0 / c_h, epsilon = 1e-15);
        }
    }

    #[test]
    fn three_segment_fixture() {
        // 0 → past ∂V_Id → T·0 → out of V_T
        let model = build_gamma2_model(3).unwrap();
        let cfg = FLSConfig::new(0.15, 0.35, &model).unwrap();
        let t0 = model.generator(b'T').apply_affine(c(0.0, 0.0)).unwrap();
        let out = model.generator(b'T').apply_affine(c(0.0, 0.3)).unwrap();
        let mut pts = vec![c(0.0, 0.0)];
        pts.extend(segment(c(0.0, 0.0), t0 * 0.4, 40));
        pts.extend(segment(t0 * 0.4, t0, 40));
        pts.extend(segment(t0, out, 40));
        let path = path_of(pts.clone());
        let rec = discretize(&path, &model, &cfg, 1).unwrap();
        assert_eq!(rec.visited, vec![Word::parse("T").unwrap()]);
        // hand trace: the first sample with |z| ≥ R, then d(z, T·0) ≤ δ, then exit
        let big_r = euclid_radius(0.35);
        let s0 = (1..pts.len()).find(|&i| pts[i].norm() >= big_r).unwrap();
        let tinv = model.generator(b'T').inverse();
        let r1 = (s0..pts.len()).find(|&i| tinv.apply_affine(pts[i]).unwrap().norm() <= euclid_radius(0.15)).unwrap();
        let s1 = (r1..pts.len()).find(|&i| tinv.apply_affine(pts[i]).unwrap().norm() >= big_r).unwrap();
        assert_relative_eq!(rec.s0, s0 as f64 * 0.01, epsilon = 1e-12);
        assert_relative_eq!(rec.stop_times[0].1, r1 as f64 * 0.01, epsilon = 1e-12);
        assert_relative_eq!(rec.stop_times[0].0, s1 as f64 * 0.01, epsilon = 1e-12);
        assert!(rec.check_invariants().is_ok());
    }

    #[test]
    fn forced_coins_accept_nothing() {
        let model = build_gamma2_model(4).unwrap();
        let cfg = FLSConfig::new(0.15, 0.35, &model).unwrap();
        let mut pr = rng(3);
        let run = simulate_fls(
            &model,
            &cfg,
            c(0.0, 0.0),
            2e-3,
            FlsStop { accepted: 1, horizon: 50.0 },
            &mut pr,
            &mut CoinSource::Forced(1.0),
            &mut NoProbe,
            false,
        )
        .unwrap();
        assert!(run.record.accepted.is_empty());
        assert!(!run.record.visited.is_empty());
        assert!(run.record.check_invariants().is_ok());
    }

    #[test]
    fn framed_and_indexed_routes_agree() {
        let model = build_gamma2_model(9).unwrap();
        let cfg = FLSConfig::new(0.15, 0.35, &model).unwrap();
        let mut compared = 0;
        for seed in 0..16 {
            let mut pr = rng(100 + seed);
            let run = simulate_fls(
                &model,
                &cfg,
                c(0.0, 0.0),
                2e-3,
                FlsStop { accepted: 2, horizon: 20.0 },
                &mut pr,
                &mut CoinSource::seeded(7 + seed),
                &mut NoProbe,
                true,
            )
            .unwrap();
            let trace = run.trace.unwrap();
            let rec2 = discretize_with(
                &trace,
                &model,
                &cfg,
                &Word::identity(),
                &mut CoinSource::seeded(7 + seed),
                &mut NoProbe,
            )
            .unwrap();
            if rec2.truncated.is_some() {
                continue;
            }
            compared += 1;
            assert_eq!(run.record.visited, rec2.visited);
            assert_eq!(run.record.accepted, rec2.accepted);
            assert_eq!(run.record.stop_times, rec2.stop_times);
            for (a, b) in run.record.kappas.iter().zip(&rec2.kappas) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
        assert!(compared >= 4, "only {compared} untruncated runs");
    }

    #[test]
    fn short_path_without_exit_gives_insufficient_data() {
        let model = build_gamma2_model(2).unwrap();
        let cfg = FLSConfig::new(0.15, 0.35, &model).unwrap();
        let path = path_of(vec![c(0.0, 0.0); 50]);
        let rec = discretize(&path, &model, &cfg, 0).unwrap();
        assert!(rec.visited.is_empty());
        assert!(matches!(
            discrete_walk_statistics(&[rec.clone(), rec], &model, 2),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn start_outside_v_is_rejected() {
        let model = build_gamma2_model(2).unwrap();
        let cfg = FLSConfig::new(0.15, 0.35, &model).unwrap();
        let path = path_of(vec![c(0.5, 0.0), c(0.5, 0.0)]);
        assert!(matches!(discretize(&path, &model, &cfg, 0), Err(Error::StartOutsideV { .. })));
    }

    #[test]
    fn invariant_checker_catches_bad_records() {
        let model = build_gamma2_model(6).unwrap();
        let cfg = FLSConfig::new(0.15, 0.35, &model).unwrap();
        let rec = simulate_fls_seeded(&model, &cfg, 2e-3, FlsStop { accepted: 2, horizon: 200.0 }, 5, &mut NoProbe)
            .unwrap();
        assert!(rec.check_invariants().is_ok());
        let mut bad = rec.clone();
        bad.kappas[0] = 2.0;
        assert!(bad.check_invariants().is_err());
        let mut bad = rec.clone();
        bad.coins[0] = if rec.coins[0] < rec.kappas[0] { 0.999 } else { 0.0 };
        assert!(bad.check_invariants().is_err());
        let mut bad = rec;
        bad.stop_times[0].1 = bad.s0;
        assert!(bad.check_invariants().is_err());
    }
}
