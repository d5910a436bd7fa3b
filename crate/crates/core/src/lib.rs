//! Subset-based 2D digital image correlation.
//!
//! The engine locates each reference subset in a target image in two stages:
//! an integer-pixel search (exhaustive scan, particle swarm, or particle swarm
//! with a star-search step) followed by an optional sub-pixel refinement
//! (Newton-Raphson or inverse-compositional Gauss-Newton) over a first-order
//! warp. Image sequences are processed serially, with subsets spread across
//! workers, or with whole image pairs spread across workers; all three
//! strategies produce bit-identical displacement fields.
//!
//! The [`bench`] module times the full method x mode matrix and
//! [`validate`] checks sub-pixel accuracy against synthetic ground truth.

pub mod bench;
pub mod correlation;
pub mod error;
pub mod image;
pub mod interp;
pub mod pipeline;
pub mod search;
pub mod subpixel;
pub mod subset;
pub mod synth;
pub mod validate;

pub use correlation::{subset_stats, zncc, zncc_memo, CorrelationMemo, SubsetStats};
pub use error::{DicError, Result};
pub use image::{load_image, load_sequence, GrayImage};
pub use interp::{interp_bilinear, InterpCoeffs};
pub use pipeline::{
    analyze_pair, analyze_sequence, DisplacementField, ExecutionMode, IntegerMethod, PoiRecord,
    ReferencePolicy, RunConfig, SubpixelMethod,
};
pub use search::{bfs_search, mpso_search, pso_search, BfsDomain, IntegerResult, SearchConfig};
pub use subpixel::{
    icgn_precompute, refine_icgn, refine_nr, RefineConfig, RefinerState, SubpixelResult, WarpParams,
};
pub use subset::{grid_subsets, GridParams, SubsetSpec};
pub use synth::{
    synth_sequence, synth_speckle, synth_warped_pair, write_sequence, GroundTruth, SpeckleParams,
    Warp,
};
