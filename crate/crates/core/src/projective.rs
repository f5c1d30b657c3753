//! Developing maps of complex projective structures and their monodromy.
//!
//! Four concrete structures are provided:
//!
//! * `identity_fuchsian`: the uniformizing structure of the thrice-punctured
//!   sphere `𝔻/Γ(2)`; the developing map is the inclusion of the disc and the
//!   monodromy is the Fuchsian representation itself.
//! * `moebius_twisted`: the same structure post-composed by a fixed map `g`,
//!   with monodromy `γ ↦ gγg⁻¹`.
//! * `puncture_log`: the local model `z ↦ (1/2πi) log z` at a cusp, whose
//!   loop monodromy is `z ↦ z + 1`.
//! * `puncture_log_perturbed(n)`: `(1/2πi) log z + 1/zⁿ`, same monodromy but
//!   no limit at the puncture.
//!
//! The logarithm is continued along sampled paths with a winding counter
//! that changes when the path crosses the negative real axis.

use std::f64::consts::TAU;

use nalgebra::{Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuchsian::{gamma2_disc_generators, Word};
use crate::moebius::{c, CP1Point, Mat2, MoebiusMap, C64};

/// Structure kinds, as written in config files.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureKind {
    IdentityFuchsian,
    MoebiusTwisted { twist: [[f64; 2]; 4] },
    PunctureLog,
    PunctureLogPerturbed { n: u32 },
}

#[derive(Clone, Debug)]
pub struct DevelopingStructure {
    pub kind: StructureKind,
    /// Images of the generator letters.
    pub monodromy: Vec<(char, MoebiusMap)>,
    pub twist: Option<MoebiusMap>,
}

/// A point of the domain: a disc point, or for the puncture kinds a point
/// of the punctured disc together with the branch of the logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainPoint {
    pub z: C64,
    pub winding: i64,
}

impl DomainPoint {
    pub fn disc(z: C64) -> Self {
        DomainPoint { z, winding: 0 }
    }
}

impl DevelopingStructure {
    pub fn identity_fuchsian() -> Self {
        let monodromy = gamma2_disc_generators().iter().map(|(l, g)| (*l as char, *g)).collect();
        DevelopingStructure { kind: StructureKind::IdentityFuchsian, monodromy, twist: None }
    }

    pub fn moebius_twisted(g: MoebiusMap) -> Self {
        let gi = g.inverse();
        let monodromy =
            gamma2_disc_generators().iter().map(|(l, h)| (*l as char, g.compose(h).compose(&gi))).collect();
        let e = g.entries();
        let twist = [[e[0].re, e[0].im], [e[1].re, e[1].im], [e[2].re, e[2].im], [e[3].re, e[3].im]];
        DevelopingStructure { kind: StructureKind::MoebiusTwisted { twist }, monodromy, twist: Some(g) }
    }

    fn puncture_monodromy() -> Vec<(char, MoebiusMap)> {
        let t = MoebiusMap::real(1.0, 1.0, 0.0, 1.0).unwrap();
        vec![('L', t), ('l', t.inverse())]
    }

    pub fn puncture_log() -> Self {
        DevelopingStructure { kind: StructureKind::PunctureLog, monodromy: Self::puncture_monodromy(), twist: None }
    }

    pub fn puncture_log_perturbed(n: u32) -> Self {
        DevelopingStructure {
            kind: StructureKind::PunctureLogPerturbed { n },
            monodromy: Self::puncture_monodromy(),
            twist: None,
        }
    }

    pub fn from_kind(kind: &StructureKind) -> Result<Self> {
        Ok(match kind {
            StructureKind::IdentityFuchsian => Self::identity_fuchsian(),
            StructureKind::MoebiusTwisted { twist } => {
                let e = twist.map(|[re, im]| c(re, im));
                Self::moebius_twisted(MoebiusMap::new(e[0], e[1], e[2], e[3])?)
            }
            StructureKind::PunctureLog => Self::puncture_log(),
            StructureKind::PunctureLogPerturbed { n } => Self::puncture_log_perturbed(*n),
        })
    }

    pub fn is_disc_kind(&self) -> bool {
        matches!(self.kind, StructureKind::IdentityFuchsian | StructureKind::MoebiusTwisted { .. })
    }

    /// The developing map as a Möbius map, for the disc kinds.
    pub fn disc_map(&self) -> Option<MoebiusMap> {
        match self.kind {
            StructureKind::IdentityFuchsian => Some(MoebiusMap::identity()),
            StructureKind::MoebiusTwisted { .. } => self.twist,
            _ => None,
        }
    }

    /// Value of the developing map as an affine number, `None` at `[1:0]`.
    pub fn evaluate_affine(&self, x: DomainPoint) -> Result<Option<C64>> {
        match self.kind {
            StructureKind::IdentityFuchsian | StructureKind::MoebiusTwisted { .. } => {
                if !(x.z.norm() < 1.0) {
                    return Err(Error::OutsideDisc(format!("{}", x.z)));
                }
                Ok(self.disc_map().expect("disc kind").apply_affine(x.z))
            }
            StructureKind::PunctureLog => Ok(Some(log_branch(x)?)),
            StructureKind::PunctureLogPerturbed { n } => {
                let v = log_branch(x)?;
                Ok(Some(v + x.z.powi(n as i32).inv()))
            }
        }
    }

    pub fn evaluate(&self, x: DomainPoint) -> Result<CP1Point> {
        Ok(match self.evaluate_affine(x)? {
            Some(v) => CP1Point::from_affine(v),
            None => CP1Point::e1(),
        })
    }

    /// Action of a generator letter on the domain (deck transformation).
    pub fn deck(&self, letter: char, x: DomainPoint) -> Result<DomainPoint> {
        match self.kind {
            StructureKind::IdentityFuchsian | StructureKind::MoebiusTwisted { .. } => {
                let g = gamma2_disc_generators()
                    .iter()
                    .find(|(l, _)| *l as char == letter)
                    .map(|(_, g)| *g)
                    .ok_or(Error::UnknownSymbol(letter))?;
                Ok(DomainPoint::disc(g.apply_affine(x.z).expect("disc point")))
            }
            _ => match letter {
                'L' => Ok(DomainPoint { z: x.z, winding: x.winding + 1 }),
                'l' => Ok(DomainPoint { z: x.z, winding: x.winding - 1 }),
                other => Err(Error::UnknownSymbol(other)),
            },
        }
    }
}

/// `(1/2πi)(Log z + 2πi·winding)`.
fn log_branch(x: DomainPoint) -> Result<C64> {
    if x.z.norm() < 1e-12 {
        return Err(Error::PunctureHit);
    }
    Ok(x.z.ln() / c(0.0, TAU) + x.winding as f64)
}

/// Product of generator images along `word`.
pub fn monodromy_of(dev: &DevelopingStructure, word: &str) -> Result<MoebiusMap> {
    let mut g = MoebiusMap::identity();
    for ch in word.chars() {
        let h = dev.monodromy.iter().find(|(l, _)| *l == ch).map(|(_, h)| *h).ok_or(Error::UnknownSymbol(ch))?;
        g = g.compose(&h);
    }
    Ok(g)
}

/// Monodromy of a reduced group word.
pub fn monodromy_of_word(dev: &DevelopingStructure, word: &Word) -> MoebiusMap {
    monodromy_of(dev, &word.to_string()).expect("group words use known letters")
}

/// Winding counter for continuing `log` along a sampled path.
#[derive(Clone, Copy, Debug)]
pub struct BranchTracker {
    pub winding: i64,
    last: C64,
}

impl BranchTracker {
    pub fn new(start: C64, winding: i64) -> Self {
        BranchTracker { winding, last: start }
    }

    /// Moves to `z`; the winding changes when the segment crosses the
    /// negative real axis.
    pub fn advance(&mut self, z: C64) -> DomainPoint {
        let a = self.last;
        if (a.im >= 0.0) != (z.im >= 0.0) {
            let t = a.im / (a.im - z.im);
            let x = a.re + t * (z.re - a.re);
            if x < 0.0 {
                if a.im >= 0.0 {
                    // counterclockwise: Arg jumps from +π to −π
                    self.winding += 1;
                } else {
                    self.winding -= 1;
                }
            }
        }
        self.last = z;
        DomainPoint { z, winding: self.winding }
    }
}

/// Values of the developing map continued along `path`.
pub fn continue_along(dev: &DevelopingStructure, path: &[C64], winding: i64) -> Result<Vec<C64>> {
    let mut tr = BranchTracker::new(path[0], winding);
    path.iter()
        .map(|z| {
            let p = tr.advance(*z);
            dev.evaluate_affine(p).map(|v| v.unwrap_or(c(f64::INFINITY, 0.0)))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementaryVerdict {
    Nonelementary,
    CommonFixedPoints,
    FiniteOrbitLeq2,
    Psu2Conjugate,
    Inconclusive,
}

impl ElementaryVerdict {
    pub fn is_elementary(&self) -> bool {
        matches!(self, Self::CommonFixedPoints | Self::FiniteOrbitLeq2 | Self::Psu2Conjugate)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Nonelementary => "nonelementary",
            Self::CommonFixedPoints => "common_fixed_points",
            Self::FiniteOrbitLeq2 => "finite_orbit_leq2",
            Self::Psu2Conjugate => "psu2_conjugate",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuspReport {
    pub word: String,
    pub trace_sq_re: f64,
    pub trace_sq_im: f64,
    pub parabolic: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub parabolic_cusps: Vec<CuspReport>,
    pub elementary_verdict: ElementaryVerdict,
    /// Normalized residual of the best invariant Hermitian form.
    pub form_residual: f64,
}

/// Residual below which an invariant Hermitian form is accepted.
pub const FORM_TOL: f64 = 1e-8;
/// Residuals between [`FORM_TOL`] and this value are reported as inconclusive.
pub const FORM_GRAY: f64 = 1e-5;

/// Best Hermitian form `H = (a, b+ic; b−ic, d)` with `gᴴHg = H` for all
/// generators, by least squares over `(a, b, c, d)`. Returns the form and
/// its residual, normalized by `‖H‖ = 1` and the generator norms.
pub fn invariant_hermitian_form(gens: &[MoebiusMap]) -> ([f64; 4], f64) {
    // Each generator contributes the 4 real equations of gᴴHg − H = 0.
    let basis: [Mat2; 4] = [
        Mat2([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
        Mat2([c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        Mat2([c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]),
        Mat2([c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
    ];
    let mut ata = Matrix4::<f64>::zeros();
    let mut scale: f64 = 1.0;
    for g in gens {
        let m = g.mat();
        scale = scale.max(m.top_singular().0.powi(2));
        let cols: Vec<[f64; 4]> = basis
            .iter()
            .map(|e| {
                let r = m.conj_transpose() * *e * m;
                let d = [r.0[0] - e.0[0], r.0[1] - e.0[1], r.0[3] - e.0[3]];
                [d[0].re, d[1].re, d[1].im, d[2].re]
            })
            .collect();
        for i in 0..4 {
            for j in 0..4 {
                ata[(i, j)] += (0..4).map(|k| cols[i][k] * cols[j][k]).sum::<f64>();
            }
        }
    }
    let eig = SymmetricEigen::new(ata);
    let (imin, lmin) =
        eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, v)| (i, *v)).expect("4 values");
    let v = eig.eigenvectors.column(imin);
    (
        [v[0], v[1], v[2], v[3]],
        lmin.max(0.0).sqrt() / scale,
    )
}

fn form_is_definite(h: &[f64; 4]) -> bool {
    let det = h[0] * h[3] - h[1] * h[1] - h[2] * h[2];
    det > 1e-6 && h[0] * h[3] > 0.0
}

fn fixed_by_all(gens: &[MoebiusMap], p: &CP1Point) -> bool {
    gens.iter().all(|g| g.apply(p).approx_eq(p, 1e-8))
}

/// Elementarity heuristic for the group generated by `gens`.
pub fn classify_group(gens: &[MoebiusMap]) -> ElementaryVerdict {
    classify_group_detailed(gens).0
}

fn classify_group_detailed(gens: &[MoebiusMap]) -> (ElementaryVerdict, f64) {
    let nontrivial: Vec<MoebiusMap> = gens.iter().filter(|g| !g.is_identity(1e-12)).copied().collect();
    if nontrivial.is_empty() {
        return (ElementaryVerdict::CommonFixedPoints, 0.0);
    }
    let mut candidates: Vec<CP1Point> = Vec::new();
    for g in &nontrivial {
        candidates.extend(g.fixed_points());
    }
    // pairwise products only among the first few generators
    let few = nontrivial.len().min(16);
    for i in 0..few {
        for j in 0..few {
            if i != j {
                candidates.extend(nontrivial[i].compose(&nontrivial[j]).fixed_points());
            }
        }
    }
    // (i) common fixed point
    if candidates.iter().any(|p| fixed_by_all(&nontrivial, p)) {
        return (ElementaryVerdict::CommonFixedPoints, 0.0);
    }
    // (ii) orbit closure of size at most 2
    let mut all = nontrivial.clone();
    all.extend(nontrivial.iter().map(|g| g.inverse()));
    for p in &candidates {
        let mut orbit = vec![*p];
        let mut i = 0;
        while i < orbit.len() && orbit.len() <= 2 {
            let q = orbit[i];
            for g in &all {
                let r = g.apply(&q);
                if !orbit.iter().any(|o| o.approx_eq(&r, 1e-8)) {
                    orbit.push(r);
                }
            }
            i += 1;
        }
        if orbit.len() <= 2 {
            return (ElementaryVerdict::FiniteOrbitLeq2, 0.0);
        }
    }
    // (iii) invariant positive-definite Hermitian form
    let (h, residual) = invariant_hermitian_form(&nontrivial);
    if residual < FORM_TOL && form_is_definite(&h) {
        return (ElementaryVerdict::Psu2Conjugate, residual);
    }
    if residual < FORM_GRAY && form_is_definite(&h) {
        return (ElementaryVerdict::Inconclusive, residual);
    }
    (ElementaryVerdict::Nonelementary, residual)
}

/// Parabolicity of the cusp words and elementarity of the monodromy group.
pub fn classify_representation(dev: &DevelopingStructure, cusp_words: &[&str]) -> Result<RepresentationReport> {
    let mut parabolic_cusps = Vec::new();
    for w in cusp_words {
        let g = monodromy_of(dev, w)?;
        let tr = g.trace();
        let t2 = tr * tr;
        let parabolic = (t2 - 4.0).norm() < 1e-8 && !g.is_identity(1e-12);
        parabolic_cusps.push(CuspReport { word: w.to_string(), trace_sq_re: t2.re, trace_sq_im: t2.im, parabolic });
    }
    let gens: Vec<MoebiusMap> =
        dev.monodromy.iter().filter(|(l, _)| l.is_ascii_uppercase()).map(|(_, g)| *g).collect();
    let (elementary_verdict, form_residual) = classify_group_detailed(&gens);
    Ok(RepresentationReport { parabolic_cusps, elementary_verdict, form_residual })
}

/// Local inverse of the developing map composed with another developing
/// map: `h = 𝒟₀⁻¹ ∘ 𝒟₁` near `x`.
#[derive(Clone, Copy, Debug)]
pub struct Germ {
    pub map: MoebiusMap,
    pub center: C64,
    /// Euclidean radius about `center` on which the formula is valid.
    pub radius: f64,
}

impl Germ {
    pub fn eval(&self, z: C64) -> Option<C64> {
        if (z - self.center).norm() > self.radius {
            return None;
        }
        self.map.apply_affine(z)
    }
}

/// Builds the germ of `𝒟₀⁻¹ ∘ 𝒟₁` at `x` for the disc kinds.
pub fn germ_compose(dev0: &DevelopingStructure, dev1: &DevelopingStructure, x: C64) -> Result<Germ> {
    let g0 = match dev0.disc_map() {
        Some(g) => g,
        None => {
            if let StructureKind::PunctureLogPerturbed { n } = dev0.kind {
                // derivative 1/(2πi z) − n/z^{n+1}
                let d = (c(0.0, TAU) * x).inv() - (n as f64) * x.powi(n as i32 + 1).inv();
                if d.norm() < 1e-12 {
                    return Err(Error::BranchPoint(format!("{x}")));
                }
            }
            return Err(Error::UnsupportedStructure("local inversion is implemented for the disc kinds".into()));
        }
    };
    let g1 = dev1
        .disc_map()
        .ok_or_else(|| Error::UnsupportedStructure("the second structure must be a disc kind".into()))?;
    if !(x.norm() < 1.0) {
        return Err(Error::OutsideDisc(format!("{x}")));
    }
    let h = g0.inverse().compose(&g1);
    let hx = h.apply_affine(x);
    match hx {
        Some(v) if v.norm() < 1.0 => {}
        _ => return Err(Error::OutOfImage(format!("𝒟₁({x}) is not in 𝒟₀(𝔻)"))),
    }
    // largest radius keeping the disc and its image inside 𝔻
    let ok = |r: f64| {
        (0..64).all(|k| {
            let z = x + C64::from_polar(r, TAU * k as f64 / 64.0);
            z.norm() < 1.0 && h.apply_affine(z).is_some_and(|w| w.norm() < 1.0)
        })
    };
    let (mut lo, mut hi) = (0.0, 1.0 - x.norm());
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Germ { map: h, center: x, radius: lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn evaluate_examples() {
        let id = DevelopingStructure::identity_fuchsian();
        assert_eq!(id.evaluate(DomainPoint::disc(c(0.0, 0.0))).unwrap(), CP1Point::e2());
        let pl = DevelopingStructure::puncture_log();
        let v = pl.evaluate_affine(DomainPoint::disc(c((-TAU).exp(), 0.0))).unwrap().unwrap();
        assert_relative_eq!(v.re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(v.im, 1.0, epsilon = 1e-14);
        let pp = DevelopingStructure::puncture_log_perturbed(1);
        let z = c(0.3, 0.4);
        let a = pp.evaluate_affine(DomainPoint::disc(z)).unwrap().unwrap();
        let b = pl.evaluate_affine(DomainPoint::disc(z)).unwrap().unwrap() + z.inv();
        assert!((a - b).norm() < 1e-14);
        assert!(matches!(pl.evaluate(DomainPoint::disc(c(1e-13, 0.0))), Err(Error::PunctureHit)));
    }

    #[test]
    fn monodromy_examples() {
        let id = DevelopingStructure::identity_fuchsian();
        assert!(monodromy_of(&id, "").unwrap().is_identity(1e-15));
        let gens = gamma2_disc_generators();
        let ts = gens[0].1.compose(&gens[2].1);
        assert!(monodromy_of(&id, "TS").unwrap().approx_eq(&ts, 1e-12));
        assert!(matches!(monodromy_of(&id, "Tq"), Err(Error::UnknownSymbol('q'))));
        let pl = DevelopingStructure::puncture_log();
        assert!(monodromy_of(&pl, "L").unwrap().approx_eq(&MoebiusMap::real(1.0, 1.0, 0.0, 1.0).unwrap(), 1e-15));
    }

    #[test]
    fn winding_around_puncture() {
        let pl = DevelopingStructure::puncture_log();
        for m in [1i64, 2, -3] {
            let n = 400 * m.unsigned_abs() as usize;
            let path: Vec<C64> =
                (0..=n).map(|i| C64::from_polar(0.5, 0.3 + m.signum() as f64 * TAU * i as f64 / 400.0)).collect();
            let vals = continue_along(&pl, &path, 0).unwrap();
            assert_relative_eq!((vals[n] - vals[0]).re, m as f64, epsilon = 1e-12);
            assert!((vals[n] - vals[0]).im.abs() < 1e-12);
        }
    }

    #[test]
    fn classify_examples() {
        let id = DevelopingStructure::identity_fuchsian();
        let rep = classify_representation(&id, &["T", "S", "Ts"]).unwrap();
        assert!(rep.parabolic_cusps.iter().all(|c| c.parabolic), "{:?}", rep.parabolic_cusps);
        assert_eq!(rep.elementary_verdict, ElementaryVerdict::Nonelementary);

        let a = MoebiusMap::real(2.0, 0.0, 0.0, 0.5).unwrap();
        assert_eq!(classify_group(&[a]), ElementaryVerdict::CommonFixedPoints);

        let mut r = ChaCha8Rng::seed_from_u64(4);
        let k1 = MoebiusMap::random_unitary(&mut r);
        let k2 = MoebiusMap::random_unitary(&mut r);
        assert_eq!(classify_group(&[k1, k2]), ElementaryVerdict::Psu2Conjugate);
    }

    #[test]
    fn classify_is_conjugation_covariant() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let g = MoebiusMap::real(1.3, 0.4, -0.2, 0.9).unwrap();
        let gi = g.inverse();
        let k1 = MoebiusMap::random_unitary(&mut r);
        let k2 = MoebiusMap::random_unitary(&mut r);
        let conj = |h: &MoebiusMap| g.compose(h).compose(&gi);
        assert_eq!(classify_group(&[conj(&k1), conj(&k2)]), ElementaryVerdict::Psu2Conjugate);
        let gens = gamma2_disc_generators();
        let fuchs = [gens[0].1, gens[2].1];
        assert_eq!(classify_group(&[conj(&fuchs[0]), conj(&fuchs[1])]), ElementaryVerdict::Nonelementary);
        // a loxodromic and an elliptic swapping its fixed points
        let a = MoebiusMap::real(2.0, 0.0, 0.0, 0.5).unwrap();
        let swap = MoebiusMap::new(c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(classify_group(&[a, swap]), ElementaryVerdict::FiniteOrbitLeq2);
        assert_eq!(classify_group(&[conj(&a), conj(&swap)]), ElementaryVerdict::FiniteOrbitLeq2);
    }

    #[test]
    fn equivariance_on_random_pairs() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let g = MoebiusMap::real(1.0, 0.5, 0.3, 1.2).unwrap();
        for dev in [DevelopingStructure::identity_fuchsian(), DevelopingStructure::moebius_twisted(g)] {
            for _ in 0..1000 {
                let z = C64::from_polar(r.random_range(0.0..0.95), r.random_range(0.0..TAU));
                let letter = ['T', 't', 'S', 's'][r.random_range(0..4)];
                let x = DomainPoint::disc(z);
                let lhs = dev.evaluate(dev.deck(letter, x).unwrap()).unwrap();
                let rhs = monodromy_of(&dev, &letter.to_string()).unwrap().apply(&dev.evaluate(x).unwrap());
                assert!(lhs.approx_eq(&rhs, 1e-8));
            }
        }
        for dev in [DevelopingStructure::puncture_log(), DevelopingStructure::puncture_log_perturbed(2)] {
            for _ in 0..1000 {
                let z = C64::from_polar(r.random_range(0.01..0.99), r.random_range(0.0..TAU));
                let x = DomainPoint { z, winding: r.random_range(-3..3) };
                let letter = ['L', 'l'][r.random_range(0..2)];
                let lhs = dev.evaluate(dev.deck(letter, x).unwrap()).unwrap();
                let rhs = monodromy_of(&dev, &letter.to_string()).unwrap().apply(&dev.evaluate(x).unwrap());
                assert!(lhs.approx_eq(&rhs, 1e-8));
            }
        }
    }

    #[test]
    fn perturbed_has_no_radial_limit() {
        let pp = DevelopingStructure::puncture_log_perturbed(3);
        let vals: Vec<f64> = (1..8)
            .map(|k| {
                let z = C64::from_polar(10f64.powi(-k), 0.4);
                pp.evaluate_affine(DomainPoint::disc(z)).unwrap().unwrap().norm()
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        assert!(vals[6] > 1e18);
    }

    #[test]
    fn germ_examples() {
        let id = DevelopingStructure::identity_fuchsian();
        let x = c(0.2, -0.1);
        let h = germ_compose(&id, &id, x).unwrap();
        assert!(h.map.is_identity(1e-15));
        assert!(h.radius > 0.0);
        // a hyperbolic isometry keeps the disc, so the germ is g itself
        let g = crate::fuchsian::gamma2_disc_generators()[0].1;
        let tw = DevelopingStructure::moebius_twisted(g);
        let h = germ_compose(&id, &tw, x).unwrap();
        assert!(h.map.approx_eq(&g, 1e-12));
        let w = c(0.1, 0.05);
        assert!((h.eval(x + w).unwrap() - g.apply_affine(x + w).unwrap()).norm() < 1e-12);
        // outside the image of a twisted disc
        let small = MoebiusMap::real(0.5, 0.0, 0.0, 2.0).unwrap();
        let tw0 = DevelopingStructure::moebius_twisted(small);
        assert!(matches!(germ_compose(&tw0, &id, c(0.5, 0.0)), Err(Error::OutOfImage(_))));
        assert!(matches!(
            germ_compose(&DevelopingStructure::puncture_log(), &id, x),
            Err(Error::UnsupportedStructure(_))
        ));
    }
}
