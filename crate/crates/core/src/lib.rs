//! Random walks in PSL(2,ℂ), hyperbolic Brownian motion on the Poincaré disc,
//! the Furstenberg–Lyons–Sullivan discretization, and the images of Brownian
//! paths under developing maps of complex projective structures.
//!
//! Conventions used throughout:
//!
//! * The disc carries the curvature −1 metric `2|dz|/(1−|z|²)`; a hyperbolic
//!   radius `ρ` about 0 is the Euclidean radius `tanh(ρ/2)`.
//! * Brownian motion has generator `½Δ` for its own metric. Planar paths use
//!   variance `h` per coordinate per step of Euclidean time `h`.
//! * ℂℙ¹ carries the chordal distance, with values in `[0, 1]`.

pub mod error;
pub mod moebius;
pub mod rng;
pub mod stats;
pub mod hbm;
pub mod walk;
pub mod projective;
pub mod fuchsian;
pub mod fls;
pub mod experiments;

pub use error::{Error, Result};
pub use moebius::{
    cartan, chordal_distance, contraction_data, normalize, CP1Point, CartanTriple, ContractionData, MoebiusMap, C64,
};

/// CSV writer with the dialect shared by every output: comma, LF, header row.
pub(crate) fn csv_writer<W: std::io::Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/moebius.md")]
    mod moebius {}
    #[doc = include_str!("../../../book/src/walks.md")]
    mod walks {}
    #[doc = include_str!("../../../book/src/brownian.md")]
    mod brownian {}
    #[doc = include_str!("../../../book/src/discretization.md")]
    mod discretization {}
    #[doc = include_str!("../../../book/src/structures.md")]
    mod structures {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
