//! Right random walks `X_n = h_1 ⋯ h_n` on finitely generated subgroups of
//! PSL(2,ℂ).
//!
//! Norms of `X_n` grow like `e^{λn}` and leave the `f64` range after a few
//! thousand steps, so products are stored as `e^s · m` with `m` a matrix of
//! unit Frobenius norm (see [`ScaledMap`]). Cartan data are read from `m`
//! and shifted by `s`.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moebius::{c, chordal_circle, chordal_distance, lemma_threshold, CP1Point, Mat2, MoebiusMap};
use crate::rng::{rng, trial_rng};
use crate::stats::MeanCi;

/// Finitely supported law on PSL(2,ℂ).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepMeasure {
    pub generators: Vec<(String, MoebiusMap)>,
    pub probabilities: Vec<f64>,
    pub symmetric: bool,
}

impl StepMeasure {
    pub fn new(generators: Vec<(String, MoebiusMap)>, probabilities: Vec<f64>) -> Result<Self> {
        if generators.is_empty() || generators.len() != probabilities.len() {
            return Err(Error::InvalidMeasure("need one probability per generator".into()));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidMeasure("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("probabilities sum to {total}, not 1")));
        }
        let symmetric = generators.iter().all(|(_, g)| generators.iter().any(|(_, h)| h.approx_eq(&g.inverse(), 1e-12)));
        Ok(StepMeasure { generators, probabilities, symmetric })
    }

    pub fn uniform(generators: Vec<(String, MoebiusMap)>) -> Result<Self> {
        let n = generators.len();
        Self::new(generators, vec![1.0 / n as f64; n])
    }

    pub fn dirac(label: &str, g: MoebiusMap) -> Self {
        Self::new(vec![(label.to_string(), g)], vec![1.0]).expect("valid Dirac measure")
    }

    /// Uniform law on `{T, T⁻¹, S, S⁻¹}` for the given pair, labelled
    /// `T, t, S, s`.
    pub fn uniform_pair(t: MoebiusMap, s: MoebiusMap) -> Self {
        Self::uniform(vec![
            ("T".into(), t),
            ("t".into(), t.inverse()),
            ("S".into(), s),
            ("s".into(), s.inverse()),
        ])
        .expect("four equal weights")
    }

    /// The half-plane pair `T = (1,2;0,1)`, `S = (1,0;2,1)`.
    pub fn gamma2_half_plane() -> Self {
        Self::uniform_pair(MoebiusMap::real(1.0, 2.0, 0.0, 1.0).unwrap(), MoebiusMap::real(1.0, 0.0, 2.0, 1.0).unwrap())
    }

    pub fn maps(&self) -> Vec<MoebiusMap> {
        self.generators.iter().map(|(_, g)| *g).collect()
    }

    fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.probabilities).expect("validated weights")
    }
}

/// `e^{log_scale} · m` with `‖m‖_F = 1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScaledMap {
    pub log_scale: f64,
    pub m: Mat2,
}

impl ScaledMap {
    pub fn identity() -> Self {
        ScaledMap::from_mat(Mat2::identity())
    }

    pub fn from_mat(m: Mat2) -> Self {
        let f = m.frobenius();
        ScaledMap { log_scale: f.ln(), m: m.scale(1.0 / f) }
    }

    pub fn from_map(g: &MoebiusMap) -> Self {
        Self::from_mat(g.mat())
    }

    /// Right multiplication, renormalizing the matrix part.
    pub fn mul_map(&self, g: &MoebiusMap) -> Self {
        let p = self.m * g.mat();
        let f = p.frobenius();
        ScaledMap { log_scale: self.log_scale + f.ln(), m: p.scale(1.0 / f) }
    }

    pub fn mul(&self, other: &ScaledMap) -> Self {
        let p = self.m * other.m;
        let f = p.frobenius();
        ScaledMap { log_scale: self.log_scale + other.log_scale + f.ln(), m: p.scale(1.0 / f) }
    }

    /// `log ‖X‖` (operator norm).
    pub fn norm_log(&self) -> f64 {
        self.log_scale + self.m.top_singular().0.ln()
    }

    /// Determinant-one representative, when its entries fit in `f64`.
    pub fn to_map(&self) -> Option<MoebiusMap> {
        if self.log_scale > 150.0 {
            return None;
        }
        MoebiusMap::from_mat(&self.m.scale(self.log_scale.exp())).ok()
    }

    pub fn apply(&self, p: &CP1Point) -> CP1Point {
        let (x1, x2) = p.coords();
        let (y1, y2) = self.m.apply_vec(x1, x2);
        CP1Point::new(y1, y2).unwrap_or_else(|| p.antipode())
    }

    /// Projective inverse via the adjugate. Only the action is meaningful;
    /// `log_scale` is carried over unchanged.
    pub fn inverse(&self) -> Self {
        let [a, b, cc, d] = self.m.0;
        ScaledMap { log_scale: self.log_scale, m: Mat2([d, -b, -cc, a]) }
    }

    /// Cartan data of the product.
    pub fn contraction(&self) -> ScaledContraction {
        let (sigma, v1) = self.m.top_singular();
        let alpha_log = self.log_scale + sigma.ln();
        let (w1, w2) = self.m.apply_vec(v1[0], v1[1]);
        let z = CP1Point::new(w1, w2).unwrap_or_else(CP1Point::e1);
        let y = CP1Point::new(-v1[1].conj(), v1[0].conj()).expect("unit vector");
        ScaledContraction { alpha_log: alpha_log.max(0.0), y, z }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ScaledContraction {
    /// `log |α|`.
    pub alpha_log: f64,
    pub y: CP1Point,
    pub z: CP1Point,
}

/// A sampled walk. `products[0]` is the identity and
/// `products[n] = products[n−1] · steps[n−1]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkRealization {
    /// Indices into the generating measure.
    pub step_indices: Vec<usize>,
    pub labels: Vec<String>,
    pub steps: Vec<MoebiusMap>,
    pub products: Vec<ScaledMap>,
    pub seed: u64,
}

impl WalkRealization {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `X_n` as a determinant-one map, while representable.
    pub fn partial_product(&self, n: usize) -> Option<MoebiusMap> {
        self.products[n].to_map()
    }
}

/// Builds the walk from an explicit sequence of steps.
pub fn walk_from_steps(measure: &StepMeasure, step_indices: Vec<usize>, seed: u64) -> WalkRealization {
    let mut products = Vec::with_capacity(step_indices.len() + 1);
    products.push(ScaledMap::identity());
    let mut steps = Vec::with_capacity(step_indices.len());
    let mut labels = Vec::with_capacity(step_indices.len());
    for &i in &step_indices {
        let (label, g) = &measure.generators[i];
        let next = products.last().expect("nonempty").mul_map(g);
        products.push(next);
        steps.push(*g);
        labels.push(label.clone());
    }
    WalkRealization { step_indices, labels, steps, products, seed }
}

pub fn sample_walk(measure: &StepMeasure, n: usize, seed: u64) -> WalkRealization {
    let mut r = rng(seed);
    let dist = measure.sampler();
    let idx: Vec<usize> = (0..n).map(|_| dist.sample(&mut r)).collect();
    walk_from_steps(measure, idx, seed)
}

/// `log ‖X_n‖` only, without storing the path.
pub fn sample_norm_log(measure: &StepMeasure, n: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let dist = measure.sampler();
    let mut x = ScaledMap::identity();
    for _ in 0..n {
        x = x.mul_map(&measure.generators[dist.sample(&mut r)].1);
    }
    x.norm_log()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda_hat: f64,
    pub ci_halfwidth: f64,
    pub n: usize,
    pub trials: usize,
    pub per_trial: Vec<f64>,
    /// Set when the support generates an elementary group; the estimate is
    /// still returned.
    pub elementary_warning: Option<String>,
}

/// Mean over trials of `(1/n) log ‖X_n‖` with a 95% normal halfwidth.
pub fn lyapunov_estimate(measure: &StepMeasure, n: usize, trials: usize, seed: u64) -> Result<LyapunovEstimate> {
    if n == 0 || trials < 2 {
        return Err(Error::InvalidConfig("lyapunov_estimate needs n >= 1 and trials >= 2".into()));
    }
    let per_trial: Vec<f64> =
        (0..trials).into_par_iter().map(|i| sample_norm_log(measure, n, trial_rng_seed(seed, i)) / n as f64).collect();
    let ci = MeanCi::of(&per_trial);
    let verdict = crate::projective::classify_group(&measure.maps());
    let elementary_warning = if verdict.is_elementary() {
        Some(format!("support generates an elementary group ({})", verdict.name()))
    } else {
        None
    };
    Ok(LyapunovEstimate { lambda_hat: ci.mean, ci_halfwidth: ci.halfwidth, n, trials, per_trial, elementary_warning })
}

pub(crate) fn trial_rng_seed(seed: u64, i: usize) -> u64 {
    crate::rng::derive_seed(seed, i as u64)
}

/// Cartan data of `X_n`.
#[derive(Clone, Copy, Debug)]
pub struct ContractionRecord {
    pub n: usize,
    /// `log |α_n|`, equal to `log ‖X_n‖`.
    pub norm_log: f64,
    pub y: CP1Point,
    pub z: CP1Point,
    pub degenerate: bool,
}

impl ContractionRecord {
    /// `|α_n|`; infinite once it leaves the `f64` range.
    pub fn alpha_abs(&self) -> f64 {
        self.norm_log.exp()
    }
}

pub fn contraction_records(walk: &WalkRealization) -> Vec<ContractionRecord> {
    walk.products
        .iter()
        .enumerate()
        .map(|(n, x)| {
            let cd = x.contraction();
            ContractionRecord {
                n,
                norm_log: cd.alpha_log,
                y: cd.y,
                z: cd.z,
                degenerate: 2.0 * cd.alpha_log <= lemma_threshold().ln(),
            }
        })
        .collect()
}

/// How a containment was decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckRoute {
    /// Points of the circle mapped by `X_n`.
    Grid,
    /// Closed form in the Cartan frame, in log coordinates.
    Frame,
    /// Degenerate `α`: nothing claimed.
    Skipped,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ContainmentResult {
    pub n: usize,
    pub escape_ok: bool,
    pub repel_ok: bool,
    pub route: CheckRoute,
}

impl ContainmentResult {
    pub fn both(&self) -> bool {
        self.escape_ok && self.repel_ok
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionCheck {
    pub lambda_prime: f64,
    pub lambda_dblprime: f64,
    pub per_n: Vec<ContainmentResult>,
    /// First `n ≥ 1` where both containments hold.
    pub first_success: Option<usize>,
    /// Smallest `N` such that both hold for every `n > N`; this is the
    /// empirical `N(ω)`.
    pub last_failure: usize,
    /// Fraction of `n` in the second half of the walk where both hold.
    pub tail_pass_rate: f64,
}

/// Radius below which containments are decided in the Cartan frame.
pub const GRID_MIN_RADIUS: f64 = 1e-7;
/// Largest `log|α|` for which the scaled matrix still resolves both
/// singular directions well enough for the grid route.
pub const GRID_MAX_LOG_ALPHA: f64 = 12.0;

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Containment `X(D(y, r)ᶜ) ⊂ D(z, r)` decided in the Cartan frame.
///
/// In the frame `X = diag(α, 1/α)`, `y = [e2]`, `z = [e1]`, and the worst
/// point of `D(y,r)ᶜ` is `[u:1]` with `|u| = r/√(1−r²)`, whose image lies at
/// chordal distance `1/√(1 + |α|⁴|u|²)` from `z`.
pub fn frame_escape(alpha_log: f64, log_r: f64) -> bool {
    let log_u = log_r - 0.5 * (-(2.0 * log_r).exp()).ln_1p();
    let log_d = -0.5 * log_add(0.0, 4.0 * alpha_log + 2.0 * log_u);
    log_d <= log_r
}

/// Containment `X(D(y, r)) ⊂ D(z, 1/2)ᶜ` in the Cartan frame: every image
/// `[α²u:1]` with `|u| ≤ r/√(1−r²)` satisfies `1 + |α|⁴|u|² ≤ 4`.
pub fn frame_repel(alpha_log: f64, log_r: f64) -> bool {
    let log_u = log_r - 0.5 * (-(2.0 * log_r).exp()).ln_1p();
    4.0 * alpha_log + 2.0 * log_u <= 3f64.ln()
}

/// Grid check of `X(D(y, r)ᶜ) ⊂ D(z, r_target)`: the image circle lies in the
/// target disc and `X⁻¹` sends the antipode of `z` into `D(y, r)`.
pub fn grid_escape(x: &ScaledMap, y: &CP1Point, z: &CP1Point, r: f64, r_target: f64, grid: usize) -> bool {
    let boundary_ok = chordal_circle(y, r, grid).iter().all(|p| chordal_distance(&x.apply(p), z) <= r_target);
    let back = x.inverse().apply(&z.antipode());
    boundary_ok && chordal_distance(&back, y) < r
}

/// Grid check of `X(D(y, r)) ⊂ D(z, 1/2)ᶜ`: the image circle avoids
/// `D(z, 1/2)` and `X⁻¹(z)` lies outside `D(y, r)`.
pub fn grid_repel(x: &ScaledMap, y: &CP1Point, z: &CP1Point, r: f64, grid: usize) -> bool {
    let boundary_ok = chordal_circle(y, r, grid).iter().all(|p| chordal_distance(&x.apply(p), z) >= 0.5);
    let back = x.inverse().apply(z);
    boundary_ok && chordal_distance(&back, y) > r
}

/// Both contraction containments at every `n`, with radii `e^{−λ′n}` and
/// `e^{−2λ″n}`.
pub fn contraction_check(
    walk: &WalkRealization,
    lambda_prime: f64,
    lambda_dblprime: f64,
    grid: usize,
) -> Result<ContractionCheck> {
    if !(lambda_prime > 0.0 && lambda_prime < lambda_dblprime) {
        return Err(Error::WindowInvalid { lambda_prime, lambda_dblprime });
    }
    let records = contraction_records(walk);
    let mut per_n = Vec::with_capacity(records.len());
    for rec in &records {
        let n = rec.n as f64;
        if rec.degenerate {
            per_n.push(ContainmentResult { n: rec.n, escape_ok: false, repel_ok: false, route: CheckRoute::Skipped });
            continue;
        }
        let log_r1 = -lambda_prime * n;
        let log_r2 = -2.0 * lambda_dblprime * n;
        let use_grid = log_r2 >= GRID_MIN_RADIUS.ln() && rec.norm_log <= GRID_MAX_LOG_ALPHA;
        let (escape_ok, repel_ok, route) = if use_grid {
            let x = &walk.products[rec.n];
            let (r1, r2) = (log_r1.exp(), log_r2.exp());
            (grid_escape(x, &rec.y, &rec.z, r1, r1, grid), grid_repel(x, &rec.y, &rec.z, r2, grid), CheckRoute::Grid)
        } else {
            (frame_escape(rec.norm_log, log_r1), frame_repel(rec.norm_log, log_r2), CheckRoute::Frame)
        };
        per_n.push(ContainmentResult { n: rec.n, escape_ok, repel_ok, route });
    }
    let first_success = per_n.iter().skip(1).find(|r| r.both()).map(|r| r.n);
    let last_failure = per_n.iter().rev().find(|r| !r.both()).map(|r| r.n).unwrap_or(0);
    let half = per_n.len() / 2;
    let tail = &per_n[half..];
    let tail_pass_rate = tail.iter().filter(|r| r.both()).count() as f64 / tail.len().max(1) as f64;
    Ok(ContractionCheck { lambda_prime, lambda_dblprime, per_n, first_success, last_failure, tail_pass_rate })
}

/// Contraction centers `z_n` and the largest successive chordal step over
/// the last quarter of the walk.
pub fn oseledets_direction(walk: &WalkRealization) -> Result<(Vec<CP1Point>, f64)> {
    if walk.len() < 2 {
        return Err(Error::InsufficientData("walk length must be at least 2".into()));
    }
    let z: Vec<CP1Point> = contraction_records(walk).into_iter().map(|r| r.z).collect();
    let start = (3 * z.len()) / 4;
    let diag = z[start.max(1)..].windows(2).map(|w| chordal_distance(&w[0], &w[1])).fold(0.0, f64::max);
    Ok((z, diag))
}

/// `X_n · z0` over independent trials.
pub fn stationary_measure_sample(
    measure: &StepMeasure,
    n: usize,
    trials: usize,
    z0: &CP1Point,
    seed: u64,
) -> Vec<CP1Point> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = trial_rng(seed, i as u64);
            let dist = measure.sampler();
            let mut x = ScaledMap::identity();
            for _ in 0..n {
                x = x.mul_map(&measure.generators[dist.sample(&mut r)].1);
            }
            x.apply(z0)
        })
        .collect()
}

/// Largest fraction of samples within `tol` of a single sample.
pub fn largest_cluster_fraction(samples: &[CP1Point], tol: f64) -> f64 {
    let best = samples
        .iter()
        .map(|p| samples.iter().filter(|q| chordal_distance(p, q) <= tol).count())
        .max()
        .unwrap_or(0);
    best as f64 / samples.len().max(1) as f64
}

/// Chordal distance from `p` to the real circle `ℝ ∪ {∞}`.
pub fn distance_to_real_circle(p: &CP1Point) -> f64 {
    // The real circle is the great circle y = 0 of the sphere; the nearest
    // point Q to P = (a, b, c) gives |P − Q|² = 2 − 2√(1 − b²).
    let b = p.to_sphere()[1];
    ((1.0 - (1.0 - b * b).max(0.0).sqrt()) / 2.0).max(0.0).sqrt()
}

/// Writes the per-step CSV: `n,label,norm_log,alpha_abs,y_chart,y_re,y_im,z_chart,z_re,z_im`.
pub fn write_walk_csv<W: Write>(walk: &WalkRealization, out: W) -> Result<()> {
    let mut w = crate::csv_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["n", "label", "norm_log", "alpha_abs", "y_chart", "y_re", "y_im", "z_chart", "z_re", "z_im"])
        .map_err(io)?;
    for rec in contraction_records(walk) {
        let label = if rec.n == 0 { "" } else { walk.labels[rec.n - 1].as_str() };
        let (yc, yv) = rec.y.chart();
        let (zc, zv) = rec.z.chart();
        w.write_record([
            rec.n.to_string(),
            label.to_string(),
            rec.norm_log.to_string(),
            rec.alpha_abs().to_string(),
            yc.to_string(),
            yv.re.to_string(),
            yv.im.to_string(),
            zc.to_string(),
            zv.re.to_string(),
            zv.im.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// `diag(α, 1/α)` for real `α`.
pub fn diag_real(alpha: f64) -> MoebiusMap {
    MoebiusMap::diag(c(alpha, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dirac_identity_walk() {
        let m = StepMeasure::dirac("e", MoebiusMap::identity());
        let w = sample_walk(&m, 20, 1);
        for n in 0..=20 {
            assert!(w.partial_product(n).unwrap().is_identity(1e-12));
        }
        let est = lyapunov_estimate(&m, 50, 4, 1).unwrap();
        assert_eq!(est.lambda_hat, 0.0);
        assert_eq!(est.ci_halfwidth, 0.0);
    }

    #[test]
    fn dirac_power_walk() {
        let g = MoebiusMap::real(1.0, 1.0, 1.0, 2.0).unwrap();
        let m = StepMeasure::dirac("g", g);
        let w = sample_walk(&m, 10, 1);
        let mut p = MoebiusMap::identity();
        for n in 1..=10 {
            p = p.compose(&g);
            let x = w.partial_product(n).unwrap();
            let scale = p.operator_norm();
            assert!(x.max_entry_diff(&p) <= 1e-12 * scale * scale);
        }
    }

    #[test]
    fn diagonal_lyapunov_is_log2() {
        let m = StepMeasure::dirac("a", diag_real(2.0));
        let est = lyapunov_estimate(&m, 137, 3, 9).unwrap();
        assert_relative_eq!(est.lambda_hat, 2f64.ln(), epsilon = 1e-12);
        assert!(est.elementary_warning.is_some());
    }

    #[test]
    fn diagonal_records() {
        let m = StepMeasure::dirac("a", diag_real(2.0));
        let w = sample_walk(&m, 2000, 0);
        let recs = contraction_records(&w);
        assert!(recs[0].degenerate);
        for r in &recs[1..] {
            assert_relative_eq!(r.norm_log, r.n as f64 * 2f64.ln(), epsilon = 1e-9 * r.n as f64);
            assert_eq!(r.y, CP1Point::e2());
            assert_eq!(r.z, CP1Point::e1());
        }
        let (_, diag) = oseledets_direction(&w).unwrap();
        assert_eq!(diag, 0.0);
    }

    #[test]
    fn diagonal_walk_contracts_from_two() {
        let m = StepMeasure::dirac("a", diag_real(2.0));
        let w = sample_walk(&m, 60, 0);
        let chk = contraction_check(&w, 0.5, 0.8, 64).unwrap();
        assert_eq!(chk.per_n[0].route, CheckRoute::Skipped);
        for r in &chk.per_n[2..] {
            assert!(r.both(), "n = {} failed: {:?}", r.n, r);
        }
        assert!(chk.per_n.iter().any(|r| r.route == CheckRoute::Grid));
        assert!(chk.per_n.iter().any(|r| r.route == CheckRoute::Frame));
    }

    #[test]
    fn window_is_validated() {
        let m = StepMeasure::dirac("a", diag_real(2.0));
        let w = sample_walk(&m, 5, 0);
        assert!(matches!(contraction_check(&w, 0.8, 0.5, 8), Err(Error::WindowInvalid { .. })));
        assert!(matches!(contraction_check(&w, 0.0, 0.5, 8), Err(Error::WindowInvalid { .. })));
    }

    #[test]
    fn lambda_prime_above_growth_fails() {
        let m = StepMeasure::dirac("a", diag_real(2.0));
        let w = sample_walk(&m, 100, 0);
        // growth rate log 2 < 0.9
        let chk = contraction_check(&w, 0.9, 1.2, 32).unwrap();
        assert!(!chk.per_n.last().unwrap().escape_ok);
    }

    #[test]
    fn frame_and_grid_routes_agree() {
        let measure = StepMeasure::gamma2_half_plane();
        for seed in 0..5 {
            let w = sample_walk(&measure, 25, seed);
            for rec in contraction_records(&w).iter().filter(|r| !r.degenerate) {
                let x = &w.products[rec.n];
                for log_r in [-1.0, -2.0, -4.0, -7.0] {
                    let r = f64::exp(log_r);
                    assert_eq!(
                        frame_escape(rec.norm_log, log_r),
                        grid_escape(x, &rec.y, &rec.z, r, r, 256),
                        "n={} r={r}",
                        rec.n
                    );
                    assert_eq!(frame_repel(rec.norm_log, log_r), grid_repel(x, &rec.y, &rec.z, r, 256));
                }
            }
        }
    }

    #[test]
    fn increment_frequencies_are_uniform() {
        let m = StepMeasure::gamma2_half_plane();
        let mut r = rng(11);
        let dist = m.sampler();
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[dist.sample(&mut r)] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn invalid_measures() {
        let g = MoebiusMap::identity();
        assert!(StepMeasure::new(vec![("a".into(), g)], vec![0.5]).is_err());
        assert!(StepMeasure::new(vec![("a".into(), g)], vec![-1.0]).is_err());
        assert!(StepMeasure::gamma2_half_plane().symmetric);
    }
}
