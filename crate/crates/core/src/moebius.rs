//! PSL(2,ℂ) acting on the Riemann sphere ℂℙ¹.
//!
//! Points are kept in homogeneous coordinates so that `[1:0]` (the point at
//! infinity of the chart `x1/x2`) needs no special casing. Distances use the
//! chordal metric
//!
//! ```text
//! d([X],[Y]) = |x1·y2 − y1·x2| / (‖X‖·‖Y‖)
//! ```
//!
//! which takes values in `[0, 1]` and is invariant under PSU(2). Maps are
//! stored as determinant-one representatives with a fixed sign convention.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Chordal tolerance used by the projective equality predicate.
pub const PROJECTIVE_TOL: f64 = 1e-10;

const SINGULAR_DET: f64 = 1e-14;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A point of ℂℙ¹ stored as a unit vector whose first nonzero coordinate is
/// real and nonnegative.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CP1Point {
    x1: C64,
    x2: C64,
}

impl CP1Point {
    /// Builds `[x1 : x2]`. Returns `None` for the zero vector or non-finite input.
    pub fn new(x1: C64, x2: C64) -> Option<Self> {
        let n = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            // Rescale very large inputs before giving up.
            let m = x1.norm().max(x2.norm());
            if m.is_finite() && m > 0.0 {
                return Self::new(x1 / m, x2 / m);
            }
            return None;
        }
        let (mut y1, mut y2) = (x1 / n, x2 / n);
        if y1.norm() > 0.0 {
            let phase = y1.conj() / y1.norm();
            y2 *= phase;
            y1 = c(y1.norm(), 0.0);
        } else {
            y2 = c(y2.norm(), 0.0);
        }
        Some(CP1Point { x1: y1, x2: y2 })
    }

    /// The point `[z : 1]` of the affine chart containing the unit disc.
    pub fn from_affine(z: C64) -> Self {
        Self::new(z, C64::new(1.0, 0.0)).expect("[z:1] is never zero")
    }

    /// `[e1] = [1:0]`.
    pub fn e1() -> Self {
        CP1Point { x1: c(1.0, 0.0), x2: c(0.0, 0.0) }
    }

    /// `[e2] = [0:1]`.
    pub fn e2() -> Self {
        CP1Point { x1: c(0.0, 0.0), x2: c(1.0, 0.0) }
    }

    pub fn coords(&self) -> (C64, C64) {
        (self.x1, self.x2)
    }

    /// `x1/x2`, or `None` at `[1:0]`.
    pub fn to_affine(&self) -> Option<C64> {
        if self.x2.norm() == 0.0 {
            None
        } else {
            Some(self.x1 / self.x2)
        }
    }

    /// Affine chart of the larger coordinate: chart 0 holds `x1/x2`
    /// (used when `|x2| >= |x1|`), chart 1 holds `x2/x1`.
    pub fn chart(&self) -> (u8, C64) {
        if self.x2.norm() >= self.x1.norm() {
            (0, self.x1 / self.x2)
        } else {
            (1, self.x2 / self.x1)
        }
    }

    /// The antipodal point, at chordal distance exactly 1.
    pub fn antipode(&self) -> Self {
        Self::new(-self.x2.conj(), self.x1.conj()).expect("unit vector")
    }

    /// Image on the unit sphere of ℝ³. Chordal distance is half the
    /// Euclidean distance between images.
    pub fn to_sphere(&self) -> [f64; 3] {
        let w = self.x1 * self.x2.conj();
        [2.0 * w.re, 2.0 * w.im, self.x1.norm_sqr() - self.x2.norm_sqr()]
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        chordal_distance(self, other) <= tol
    }

    /// Uniformly distributed point for the spherical area measure.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let zc: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        Self::from_sphere([(1.0 - zc * zc).sqrt() * phi.cos(), (1.0 - zc * zc).sqrt() * phi.sin(), zc])
    }

    /// Inverse of [`CP1Point::to_sphere`].
    pub fn from_sphere(p: [f64; 3]) -> Self {
        // [x1:x2] with |x1|² = (1+z)/2, |x2|² = (1−z)/2, x1·conj(x2) = (x+iy)/2.
        let z = p[2].clamp(-1.0, 1.0);
        let a = ((1.0 + z) / 2.0).sqrt();
        if a > 1e-300 {
            let x2 = c(p[0], -p[1]) / (2.0 * a);
            Self::new(c(a, 0.0), x2).expect("nonzero")
        } else {
            Self::e2()
        }
    }
}

impl PartialEq for CP1Point {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, PROJECTIVE_TOL)
    }
}

impl fmt::Display for CP1Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} : {}]", self.x1, self.x2)
    }
}

/// `|x1·y2 − y1·x2| / (‖X‖·‖Y‖)`, clamped to `[0, 1]`.
pub fn chordal_distance(p: &CP1Point, q: &CP1Point) -> f64 {
    let cross = p.x1 * q.x2 - q.x1 * p.x2;
    cross.norm().min(1.0)
}

/// Chordal distance between two affine points `[z:1]` and `[w:1]`.
pub fn chordal_distance_affine(z: C64, w: C64) -> f64 {
    ((z - w).norm() / ((1.0 + z.norm_sqr()).sqrt() * (1.0 + w.norm_sqr()).sqrt())).min(1.0)
}

/// Raw 2×2 complex matrix `[[m0, m1], [m2, m3]]`, no normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [C64; 4]);

impl Mat2 {
    pub fn identity() -> Self {
        Mat2([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
    }

    pub fn det(&self) -> C64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    pub fn apply_vec(&self, x1: C64, x2: C64) -> (C64, C64) {
        (self.0[0] * x1 + self.0[1] * x2, self.0[2] * x1 + self.0[3] * x2)
    }

    pub fn conj_transpose(&self) -> Self {
        let m = self.0;
        Mat2([m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()])
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Mat2(self.0.map(|z| z * s))
    }

    /// Largest singular value and its right singular vector, in closed form
    /// from the Hermitian matrix `AᴴA`. When `AᴴA` is a multiple of the
    /// identity the vector is `e1`.
    pub fn top_singular(&self) -> (f64, [C64; 2]) {
        let [a, b, cc, d] = self.0;
        let p = a.norm_sqr() + cc.norm_sqr();
        let r = b.norm_sqr() + d.norm_sqr();
        let q = a.conj() * b + cc.conj() * d;
        let half_gap = 0.5 * (p - r);
        let lam = 0.5 * (p + r) + (half_gap * half_gap + q.norm_sqr()).sqrt();
        // Pick the eigenvector row that avoids cancellation.
        let v = if p >= r { [c(lam - r, 0.0), q.conj()] } else { [q, c(lam - p, 0.0)] };
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        let scale = lam.max(f64::MIN_POSITIVE);
        let v = if n <= 1e-13 * scale { [c(1.0, 0.0), c(0.0, 0.0)] } else { [v[0] / n, v[1] / n] };
        (lam.sqrt(), v)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (m, n) = (self.0, o.0);
        Mat2([
            m[0] * n[0] + m[1] * n[2],
            m[0] * n[1] + m[1] * n[3],
            m[2] * n[0] + m[3] * n[2],
            m[2] * n[1] + m[3] * n[3],
        ])
    }
}

/// A class in PSL(2,ℂ), represented by its determinant-one matrix whose
/// first entry of largest modulus has nonnegative real part.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MoebiusMap {
    a: C64,
    b: C64,
    c: C64,
    d: C64,
}

/// Divides by a square root of the determinant and fixes the sign.
pub fn normalize(a: C64, b: C64, c_: C64, d: C64) -> Result<MoebiusMap> {
    let det = a * d - b * c_;
    if !(det.norm() >= SINGULAR_DET) {
        return Err(Error::SingularMatrix { det_abs: det.norm() });
    }
    let s = det.sqrt();
    Ok(MoebiusMap::canonical(a / s, b / s, c_ / s, d / s))
}

impl MoebiusMap {
    fn canonical(a: C64, b: C64, c_: C64, d: C64) -> Self {
        let entries = [a, b, c_, d];
        let mut lead = entries[0];
        let mut best = entries[0].norm();
        for z in &entries[1..] {
            // strict comparison: the first of equal moduli wins
            if z.norm() > best * (1.0 + 1e-12) {
                best = z.norm();
                lead = *z;
            }
        }
        let flip = lead.re < 0.0 || (lead.re == 0.0 && lead.im < 0.0);
        if flip {
            MoebiusMap { a: -a, b: -b, c: -c_, d: -d }
        } else {
            MoebiusMap { a, b, c: c_, d }
        }
    }

    pub fn new(a: C64, b: C64, c_: C64, d: C64) -> Result<Self> {
        normalize(a, b, c_, d)
    }

    /// Real-entry constructor, mainly for PSL(2,ℝ) examples.
    pub fn real(a: f64, b: f64, c_: f64, d: f64) -> Result<Self> {
        normalize(c(a, 0.0), c(b, 0.0), c(c_, 0.0), c(d, 0.0))
    }

    pub fn identity() -> Self {
        MoebiusMap { a: c(1.0, 0.0), b: c(0.0, 0.0), c: c(0.0, 0.0), d: c(1.0, 0.0) }
    }

    /// `diag(alpha, 1/alpha)`.
    pub fn diag(alpha: C64) -> Self {
        MoebiusMap::canonical(alpha, c(0.0, 0.0), c(0.0, 0.0), alpha.inv())
    }

    pub fn entries(&self) -> [C64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn mat(&self) -> Mat2 {
        Mat2(self.entries())
    }

    /// From a raw matrix (normalizing it).
    pub fn from_mat(m: &Mat2) -> Result<Self> {
        normalize(m.0[0], m.0[1], m.0[2], m.0[3])
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        MoebiusMap::canonical(self.d, -self.b, -self.c, self.a)
    }

    pub fn apply(&self, p: &CP1Point) -> CP1Point {
        let (x1, x2) = p.coords();
        let (y1, y2) = self.mat().apply_vec(x1, x2);
        CP1Point::new(y1, y2).expect("invertible image of a nonzero vector")
    }

    /// Action on the affine chart; `None` when the image is `[1:0]`.
    pub fn apply_affine(&self, z: C64) -> Option<C64> {
        let den = self.c * z + self.d;
        if den.norm() == 0.0 {
            None
        } else {
            Some((self.a * z + self.b) / den)
        }
    }

    /// Complex derivative of the affine action, `1/(cz+d)²`.
    pub fn derivative_affine(&self, z: C64) -> C64 {
        let den = self.c * z + self.d;
        (den * den).inv()
    }

    pub fn compose(&self, other: &Self) -> Self {
        let m = self.mat() * other.mat();
        // det is 1 up to rounding; renormalize to keep drift out.
        normalize(m.0[0], m.0[1], m.0[2], m.0[3]).unwrap_or(MoebiusMap::canonical(m.0[0], m.0[1], m.0[2], m.0[3]))
    }

    /// `‖g‖ = sup_{‖X‖=1} ‖gX‖`, the largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.mat().top_singular().0.max(1.0)
    }

    /// Spherical derivative for `|ds| = |dz|/(1+|z|²)`. For a
    /// determinant-one matrix this equals `‖X‖²/‖gX‖²` at `[X]`.
    pub fn spherical_derivative(&self, p: &CP1Point) -> f64 {
        let (x1, x2) = p.coords();
        let (y1, y2) = self.mat().apply_vec(x1, x2);
        (x1.norm_sqr() + x2.norm_sqr()) / (y1.norm_sqr() + y2.norm_sqr())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let m = self.mat();
        let p = m * m.conj_transpose();
        let id = Mat2::identity();
        p.0.iter().zip(id.0.iter()).all(|(x, y)| (x - y).norm() <= tol)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        let id = MoebiusMap::identity();
        self.max_entry_diff(&id) <= tol
    }

    /// Entrywise distance between the classes, minimized over the sign.
    pub fn max_entry_diff(&self, other: &Self) -> f64 {
        let e = self.entries();
        let f = other.entries();
        let plus = e.iter().zip(f.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let minus = e.iter().zip(f.iter()).map(|(x, y)| (x + y).norm()).fold(0.0, f64::max);
        plus.min(minus)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_entry_diff(other) <= tol
    }

    /// Fixed points on ℂℙ¹: one for parabolic classes, two otherwise.
    /// Returns an empty list for the identity.
    pub fn fixed_points(&self) -> Vec<CP1Point> {
        if self.is_identity(1e-12) {
            return Vec::new();
        }
        let tr = self.trace();
        let disc = (tr * tr - 4.0).sqrt();
        let mut out: Vec<CP1Point> = Vec::with_capacity(2);
        for lam in [(tr + disc) / 2.0, (tr - disc) / 2.0] {
            let v1 = (self.b, lam - self.a);
            let v2 = (lam - self.d, self.c);
            let n1 = v1.0.norm_sqr() + v1.1.norm_sqr();
            let n2 = v2.0.norm_sqr() + v2.1.norm_sqr();
            let v = if n1 >= n2 { v1 } else { v2 };
            if let Some(p) = CP1Point::new(v.0, v.1) {
                if !out.iter().any(|q| q.approx_eq(&p, 1e-7)) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Random class with entries uniform in `[-bound, bound]` (real and
    /// imaginary parts), rejecting near-singular draws.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> Self {
        loop {
            let mut e = [C64::new(0.0, 0.0); 4];
            for z in e.iter_mut() {
                *z = c(rng.random_range(-bound..bound), rng.random_range(-bound..bound));
            }
            if let Ok(g) = normalize(e[0], e[1], e[2], e[3]) {
                if (e[0] * e[3] - e[1] * e[2]).norm() > 1e-3 {
                    return g;
                }
            }
        }
    }

    /// Random element of PSU(2).
    pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let p = CP1Point::random(rng);
        let (u, v) = p.coords();
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let ph = C64::from_polar(1.0, theta);
        let (u, v) = (u * ph, v * ph);
        MoebiusMap::canonical(u, -v.conj(), v, u.conj())
    }
}

impl Mul for MoebiusMap {
    type Output = MoebiusMap;
    fn mul(self, rhs: MoebiusMap) -> MoebiusMap {
        self.compose(&rhs)
    }
}

impl PartialEq for MoebiusMap {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, 1e-12)
    }
}

impl fmt::Display for MoebiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}; {}, {})", self.a, self.b, self.c, self.d)
    }
}

/// `g = k · diag(alpha, 1/alpha) · kprime` with `k`, `kprime` in SU(2).
#[derive(Clone, Copy, Debug)]
pub struct CartanTriple {
    pub k: MoebiusMap,
    pub alpha: C64,
    pub kprime: MoebiusMap,
}

impl CartanTriple {
    pub fn reconstruct(&self) -> MoebiusMap {
        self.k.compose(&MoebiusMap::diag(self.alpha)).compose(&self.kprime)
    }
}

/// SU(2) matrix whose first column is the unit vector `u`.
fn su2_with_first_column(u: [C64; 2]) -> Mat2 {
    Mat2([u[0], -u[1].conj(), u[1], u[0].conj()])
}

/// Cartan (KAK) decomposition from the closed-form 2×2 SVD.
///
/// With `v1` the top right singular vector and `v2 = (−v̄12, v̄11)`, the
/// matrix `V = [v1 v2]` lies in SU(2); likewise `U` built from
/// `u1 = g·v1/σ1`. Since `det g = 1` the lower diagonal entry of `Uᴴ g V`
/// is exactly `1/σ1`, so `alpha = σ1` is real and positive. When `g` is
/// unitary (`σ1 = 1`) the choice is `kprime = identity`, `k = g`.
pub fn cartan(g: &MoebiusMap) -> CartanTriple {
    let m = g.mat();
    let (sigma, v1) = m.top_singular();
    if sigma <= 1.0 + 1e-13 {
        return CartanTriple { k: *g, alpha: c(1.0, 0.0), kprime: MoebiusMap::identity() };
    }
    let vmat = su2_with_first_column(v1);
    let (w1, w2) = m.apply_vec(v1[0], v1[1]);
    let n = (w1.norm_sqr() + w2.norm_sqr()).sqrt();
    let umat = su2_with_first_column([w1 / n, w2 / n]);
    let k = MoebiusMap::canonical(umat.0[0], umat.0[1], umat.0[2], umat.0[3]);
    let vh = vmat.conj_transpose();
    let kprime = MoebiusMap::canonical(vh.0[0], vh.0[1], vh.0[2], vh.0[3]);
    CartanTriple { k, alpha: c(sigma, 0.0), kprime }
}

/// Contraction centers of the diagonal lemma.
#[derive(Clone, Copy, Debug)]
pub struct ContractionData {
    pub alpha: C64,
    /// `kprime⁻¹·[e2]`: the repelling center.
    pub y: CP1Point,
    /// `k·[e1]`: the attracting center.
    pub z: CP1Point,
    /// Set when `|alpha|² ≤ √(3/2)`; the containments are then not claimed.
    pub degenerate: bool,
}

/// Threshold on `|alpha|²` above which the diagonal lemma applies.
pub fn lemma_threshold() -> f64 {
    1.5f64.sqrt()
}

pub fn contraction_data(g: &MoebiusMap) -> ContractionData {
    let t = cartan(g);
    let y = t.kprime.inverse().apply(&CP1Point::e2());
    let z = t.k.apply(&CP1Point::e1());
    ContractionData { alpha: t.alpha, y, z, degenerate: t.alpha.norm_sqr() <= lemma_threshold() }
}

/// Points on the chordal circle of radius `r` around `center`.
pub fn chordal_circle(center: &CP1Point, r: f64, count: usize) -> Vec<CP1Point> {
    let r = r.clamp(0.0, 1.0);
    // Around [e2] the circle d([u:1],[e2]) = r is |u| = r/sqrt(1−r²);
    // move it to `center` with a unitary sending [e2] to center.
    let (x1, x2) = center.coords();
    let rot = Mat2([x2.conj(), x1, -x1.conj(), x2]);
    let s = (1.0 - r * r).max(0.0).sqrt();
    (0..count)
        .map(|i| {
            let th = std::f64::consts::TAU * (i as f64) / (count as f64);
            let (u1, u2) = (C64::from_polar(r, th), c(s, 0.0));
            let (y1, y2) = rot.apply_vec(u1, u2);
            CP1Point::new(y1, y2).expect("unit vector")
        })
        .collect()
}
