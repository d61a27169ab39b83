//! Support toolkit for visual-inertial SLAM pipelines: robust
//! feature-matching enhancement (spatial masking + homography RANSAC with
//! a tightened inlier threshold), a trainable hierarchical bag-of-words
//! vocabulary over 256-d descriptors with keyframe retrieval, SE(3)
//! pose-graph correction of drifted trajectories, and the ATE/RPE metrics
//! used to evaluate the result.

pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod loopgraph;
pub mod matching;
pub mod placedb;
pub mod rng;
pub mod synth;
pub mod vocab;

pub use evaluation::{
    associate, ate, error_distribution, improvement_report, rpe, umeyama_align, AlignMode,
    Alignment, AteResult, ErrorDistribution, EvalError, RpeResult,
};
pub use geometry::{
    apply_homography, GeometryError, Homography, Intrinsics, Point2, PointUnit, PoseSE3,
    Trajectory,
};
pub use matching::{
    dlt_homography, enhance_matches, mask_filter, match_descriptors, ransac_homography,
    transfer_error, Correspondence, Descriptor, Feature, FeatureSet, MatchConfig, MatchError,
    MatchPair, MatchReport, PairOutcome, TransferErrorMode, DESCRIPTOR_DIM,
};
pub use loopgraph::{
    close_loops, geometric_verify, optimize, GraphError, LoopCloseConfig, LoopCloseOutcome,
    LoopConstraint, LoopEdge, OptimizeParams, OptimizeResult, PoseGraph, VerifyConfig,
};
pub use placedb::{Candidate, InvertedIndex, Keyframe, KeyframeDatabase, KeyframeRecord, QueryParams};
pub use vocab::{score, train_vocabulary, BowVector, VocabError, VocabularyTree};
