//! Discrete Morse complexes for compact surfaces with boundary.
//!
//! Everything is exact: field values are arbitrary-precision rationals and
//! all homological algebra runs over arbitrary-precision integers. The
//! `Scalar` trait keeps the core generic over the coefficient ring; `Int` is
//! the concrete choice used throughout the crate's own pipelines.

pub mod complex;
pub mod duality;
pub mod error;
pub mod extract;
pub mod field;
pub mod fixtures;
pub mod geom;
pub mod gradient;
pub mod homology;
pub mod lower_star;
pub mod matrix;
pub mod mesh;
pub mod morse;
pub mod oracle;
pub mod report;
pub mod scalar;
pub mod ses;
pub mod snf;

pub use complex::{cone, twisted_sum, validate_chain_map, ChainMap, GradedComplex};
pub use error::{Error, Result};
pub use extract::{extract_morse_data, extract_morse_data_reseeded, MorseData};
pub use gradient::{
    complex_universe, eliminate, eta_check, mesh_universe, validate_matching, vpath_complex,
    vpath_differential, vpath_differential_ascending, CellFilter, CellId, Matching,
    MorseEquivalence, Universe,
};
pub use duality::{
    reversed_field_cross_check, verify_duality, DualityContext, DualityReport, HomologyPairing,
    PairingMatrix,
};
pub use geom::{geometric_pairing_check, GeometricReport};
pub use homology::{
    group_string, homology, induced_map_on_homology, is_quasi_isomorphism, DegreeHomology,
    InducedMap,
};
pub use lower_star::{
    absolute_matching, boundary_matching, classify_vertices, interior_matching, tangent_matching,
    Census, CritKind, VertexClass,
};
pub use matrix::Mat;
pub use morse::{
    build_absolute_complex, build_boundary_complex, build_morse_data, build_relative_complex,
    complete_twist, hat_extension, verify_extension, ExtensionReport, HatExtension, TwistEntry,
};
pub use oracle::{
    boundary_homology, groups_equal, les_of_pair, pair_ses, relative_homology,
    simplicial_homology,
};
pub use report::{
    analyze, check_hand_data, morse_data_from_json, morse_data_to_json, parse_bundle, Aggregate,
    AggregateEntry, AnalyzeOptions, DataChecks, HandData, Report, Verdict,
};
pub use scalar::Scalar;
pub use ses::{check_exactness, exact_at, long_exact_sequence, GroupMap, LesRecord, Ses};
pub use snf::{kernel_basis, smith_normal_form, solve, Snf};

/// Coefficient ring used by the shipped pipelines.
pub type Int = num_bigint::BigInt;
/// Exact field-value type for vertex data.
pub type Rat = num_rational::BigRational;
