//! The level-two congruence group Γ(2) acting on the disc.
//!
//! Γ(2) is free on `T = (1,2;0,1)` and `S = (1,0;2,1)` in the upper
//! half-plane. The Cayley map `C(z) = (z − i)/(z + i)` sends `i` to 0 and
//! conjugates both generators into SU(1,1). Words are reduced strings over
//! `{T, t, S, s}` where lower case denotes the inverse.
//!
//! The Dirichlet domain at 0 is the ideal quadrilateral cut out by the
//! bisectors between 0 and the four points `T^{±1}·0`, `S^{±1}·0`. A point can
//! therefore be brought back to the domain of the identity by applying
//! generators while one of those four points is closer than 0; see
//! [`recenter`].

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbm::{distance_from_origin, euclid_radius, hyperbolic_disc_as_euclid, hyperbolic_distance};
use crate::moebius::{c, Mat2, MoebiusMap, C64};

/// Default cap on the orbit index size.
pub const DEFAULT_WORD_CAP: usize = 200_000;


/// Reduced word in the free group on `T, S`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word(Vec<u8>);

fn inverse_letter(l: u8) -> u8 {
    if l.is_ascii_uppercase() {
        l.to_ascii_lowercase()
    } else {
        l.to_ascii_uppercase()
    }
}

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn letter(l: u8) -> Self {
        Word(vec![l])
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut w = Word::identity();
        for ch in s.chars() {
            if !"TtSs".contains(ch) {
                return Err(Error::UnknownSymbol(ch));
            }
            w.push(ch as u8);
        }
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    /// Right multiplication by one letter, with free reduction.
    pub fn push(&mut self, l: u8) {
        if self.0.last() == Some(&inverse_letter(l)) {
            self.0.pop();
        } else {
            self.0.push(l);
        }
    }

    pub fn mul(&self, other: &Word) -> Word {
        let mut w = self.clone();
        for &l in &other.0 {
            w.push(l);
        }
        w
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&l| inverse_letter(l)).collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(std::str::from_utf8(&self.0).expect("ascii letters"))
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = Error;
    fn try_from(s: String) -> Result<Word> {
        Word::parse(&s)
    }
}

/// Cayley matrix `(1, −i; 1, i)`, sending `i` to 0.
pub fn cayley() -> MoebiusMap {
    MoebiusMap::new(c(1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0)).expect("det = 2i")
}

/// `C g C⁻¹`.
pub fn to_disc(g: &MoebiusMap) -> MoebiusMap {
    let k = cayley();
    k.compose(g).compose(&k.inverse())
}

/// Half-plane generators `T`, `S`.
pub fn gamma2_half_plane() -> (MoebiusMap, MoebiusMap) {
    (MoebiusMap::real(1.0, 2.0, 0.0, 1.0).unwrap(), MoebiusMap::real(1.0, 0.0, 2.0, 1.0).unwrap())
}

/// Disc-model generators in the order `T, t, S, s`.
pub fn gamma2_disc_generators() -> [(u8, MoebiusMap); 4] {
    let (t, s) = gamma2_half_plane();
    let (td, sd) = (to_disc(&t), to_disc(&s));
    [(b'T', td), (b't', td.inverse()), (b'S', sd), (b's', sd.inverse())]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitEntry {
    pub word: Word,
    pub point: C64,
    /// `d_hyp(0, γ·0)`.
    pub displacement: f64,
}

const BUCKET: f64 = 0.02;

#[derive(Clone, Debug)]
pub struct FuchsianGroupModel {
    pub generators: [(u8, MoebiusMap); 4],
    pub word_radius: usize,
    pub orbit_index: Vec<OrbitEntry>,
    /// Smallest displacement of a non-identity word; `None` for radius 0.
    pub m0: Option<f64>,
    buckets: HashMap<(i32, i32), Vec<usize>>,
    /// `g·0` for each generator, for recentering.
    gen_points: [C64; 4],
}

fn bucket_of(z: C64) -> (i32, i32) {
    ((z.re / BUCKET).floor() as i32, (z.im / BUCKET).floor() as i32)
}

/// Number of reduced words of length at most `r` on two generators.
pub fn reduced_word_count(r: usize) -> usize {
    2 * 3usize.saturating_pow(r as u32) - 1
}

pub fn build_gamma2_model(word_radius: usize) -> Result<FuchsianGroupModel> {
    build_gamma2_model_capped(word_radius, DEFAULT_WORD_CAP)
}

pub fn build_gamma2_model_capped(word_radius: usize, cap: usize) -> Result<FuchsianGroupModel> {
    if word_radius > 20 || reduced_word_count(word_radius) > cap {
        return Err(Error::WordBudgetExceeded { cap });
    }
    let generators = gamma2_disc_generators();
    for (l, g) in &generators {
        // isometries of the disc preserve the unit circle
        for k in 0..8 {
            let u = C64::from_polar(1.0, k as f64 * 0.7853981633974483);
            let w = g.apply_affine(u).expect("finite image");
            if (w.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidConfig(format!("generator {} does not preserve the circle", *l as char)));
            }
        }
    }
    let gen_points = generators.map(|(_, g)| g.apply_affine(c(0.0, 0.0)).expect("finite"));
    let mut orbit_index = vec![OrbitEntry { word: Word::identity(), point: c(0.0, 0.0), displacement: 0.0 }];
    let mut mats: Vec<Mat2> = vec![Mat2::identity()];
    let mut frontier = vec![0usize];
    for _ in 0..word_radius {
        let mut next = Vec::new();
        for &i in &frontier {
            for (l, g) in &generators {
                let w = &orbit_index[i].word;
                if w.0.last() == Some(&inverse_letter(*l)) {
                    continue;
                }
                let mut nw = w.clone();
                nw.push(*l);
                let m = mats[i] * g.mat();
                let (p, q) = m.apply_vec(c(0.0, 0.0), c(1.0, 0.0));
                let point = p / q;
                orbit_index.push(OrbitEntry { word: nw, point, displacement: distance_from_origin(point) });
                mats.push(m);
                next.push(orbit_index.len() - 1);
            }
        }
        frontier = next;
    }
    let mut buckets: HashMap<(i32, i32), Vec<usize>> = HashMap::new();
    for (i, e) in orbit_index.iter().enumerate() {
        buckets.entry(bucket_of(e.point)).or_default().push(i);
    }
    let m0 = orbit_index.iter().skip(1).map(|e| e.displacement).fold(None, |acc: Option<f64>, d| {
        Some(acc.map_or(d, |a| a.min(d)))
    });
    let model = FuchsianGroupModel { generators, word_radius, orbit_index, m0, buckets, gen_points };
    model.check_collisions()?;
    Ok(model)
}

impl FuchsianGroupModel {
    fn candidates(&self, z: C64, euclid_reach: f64) -> impl Iterator<Item = usize> + '_ {
        let (lo, hi) = (bucket_of(z - c(euclid_reach, euclid_reach)), bucket_of(z + c(euclid_reach, euclid_reach)));
        (lo.0..=hi.0).flat_map(move |i| {
            (lo.1..=hi.1).flat_map(move |j| self.buckets.get(&(i, j)).into_iter().flatten().copied())
        })
    }

    /// Indexed orbit points within hyperbolic distance `rho` of `z`, nearest first.
    pub fn orbit_points_within(&self, z: C64, rho: f64) -> Vec<(usize, f64)> {
        let (ec, er) = hyperbolic_disc_as_euclid(z, rho);
        let reach = (ec - z).norm() + er;
        let mut out: Vec<(usize, f64)> = self
            .candidates(z, reach)
            .map(|i| (i, hyperbolic_distance(z, self.orbit_index[i].point)))
            .filter(|(_, d)| *d < rho)
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        out
    }

    /// Nearest indexed orbit point within `rho`.
    pub fn nearest_orbit_point(&self, z: C64, rho: f64) -> Option<(&OrbitEntry, f64)> {
        self.orbit_points_within(z, rho).first().map(|&(i, d)| (&self.orbit_index[i], d))
    }

    fn check_collisions(&self) -> Result<()> {
        for (i, e) in self.orbit_index.iter().enumerate() {
            for (j, d) in self.orbit_points_within(e.point, 1e-6) {
                if j != i {
                    return Err(Error::OrbitCollision(format!(
                        "{} and {} at hyperbolic distance {d:e}",
                        e.word, self.orbit_index[j].word
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn generator(&self, l: u8) -> MoebiusMap {
        self.generators.iter().find(|(m, _)| *m == l).expect("known letter").1
    }

    /// Disc matrix of a word.
    pub fn word_map(&self, w: &Word) -> MoebiusMap {
        w.0.iter().fold(MoebiusMap::identity(), |acc, &l| acc.compose(&self.generator(l)))
    }

    /// Moves `z` into the Dirichlet domain of the identity, composing the
    /// applied generators into `frame` so that `frame·z` is unchanged.
    /// Returns whether the frame changed.
    pub fn recenter(&self, frame: &mut Word, z: &mut C64) -> bool {
        let mut changed = false;
        for _ in 0..10_000 {
            let r0 = z.norm();
            let mut best: Option<(usize, f64)> = None;
            for (k, a) in self.gen_points.iter().enumerate() {
                // pseudo-hyperbolic distance to a = g·0
                let d = (*z - a).norm() / (c(1.0, 0.0) - a.conj() * *z).norm();
                if d < r0 * (1.0 - 1e-12) && best.is_none_or(|(_, b)| d < b) {
                    best = Some((k, d));
                }
            }
            match best {
                None => return changed,
                Some((k, _)) => {
                    let (l, g) = self.generators[k];
                    *z = g.inverse().apply_affine(*z).expect("disc point");
                    frame.push(l);
                    changed = true;
                }
            }
        }
        changed
    }

    /// Euclidean radius of `F` and `V` for the given hyperbolic radii.
    pub fn ball_radii(delta: f64, delta_prime: f64) -> (f64, f64) {
        (euclid_radius(delta), euclid_radius(delta_prime))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn words_reduce() {
        let w = Word::parse("TSs").unwrap();
        assert_eq!(w.to_string(), "T");
        assert_eq!(Word::parse("TS").unwrap().mul(&Word::parse("sT").unwrap()).to_string(), "TT");
        assert!(Word::parse("TS").unwrap().mul(&Word::parse("TS").unwrap().inverse()).is_empty());
        assert!(matches!(Word::parse("Tx"), Err(Error::UnknownSymbol('x'))));
    }

    #[test]
    fn generators_are_disc_isometries() {
        for (_, g) in gamma2_disc_generators() {
            let e = g.entries();
            // SU(1,1): d = conj(a), c = conj(b) up to the global sign
            assert!((e[3] - e[0].conj()).norm() < 1e-12 || (e[3] + e[0].conj()).norm() < 1e-12);
            assert!((e[2] - e[1].conj()).norm() < 1e-12 || (e[2] + e[1].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn t_displacement() {
        let m = build_gamma2_model(1).unwrap();
        let t0 = m.orbit_index.iter().find(|e| e.word.to_string() == "T").unwrap();
        assert_relative_eq!(t0.displacement, 2.0 * 1f64.asinh(), epsilon = 1e-12);
        assert_relative_eq!(t0.point.re, 0.5, epsilon = 1e-12);
        assert_relative_eq!(t0.point.im, -0.5, epsilon = 1e-12);
        assert_relative_eq!(m.m0.unwrap(), 2.0 * 1f64.asinh(), epsilon = 1e-12);
    }

    #[test]
    fn radius_zero_model() {
        let m = build_gamma2_model(0).unwrap();
        assert_eq!(m.orbit_index.len(), 1);
        assert!(m.m0.is_none());
    }

    #[test]
    fn index_size_and_budget() {
        let m = build_gamma2_model(4).unwrap();
        assert_eq!(m.orbit_index.len(), reduced_word_count(4));
        assert!(m.orbit_index.iter().all(|e| e.point.norm() < 1.0));
        assert!(matches!(build_gamma2_model_capped(6, 100), Err(Error::WordBudgetExceeded { cap: 100 })));
    }

    #[test]
    fn word_map_matches_index() {
        let m = build_gamma2_model(3).unwrap();
        for e in &m.orbit_index {
            let p = m.word_map(&e.word).apply_affine(c(0.0, 0.0)).unwrap();
            assert!((p - e.point).norm() < 1e-12);
        }
    }
}
