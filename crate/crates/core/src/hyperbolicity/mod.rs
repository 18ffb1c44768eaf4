//! Lyapunov spectra, periodic-orbit exponent bounds, index constancy,
//! realisation of exponent orderings, stable/unstable splittings and sampled
//! certificates of uniform contraction.

mod certify;
mod periodic;
mod spectrum;
mod splitting;

pub use certify::{certify_uniform_contraction, CertifyParams, HyperbolicityCertificate, Verdict, Witness};
pub use periodic::{
    check_index_constancy, extremal_exponent_bounds, periodic_spectrum, realize_reordering, ExtremalBounds,
    IndexVerdict, Reordering,
};
pub use spectrum::{lyapunov_spectrum, SpectrumEstimate, SpectrumParams};
pub use splitting::{oseledets_splitting, SplittingEstimate, SplittingParams};

/// Exponents closer to zero than this are treated as zero.
pub const ZERO_THRESHOLD: f64 = 1e-6;

/// Sorted exponents closer than this form one multiplicity cluster.
pub const CLUSTER_TOLERANCE: f64 = 1e-9;
