//! Corpus engineering toolkit for chemical-gene relation extraction.
//!
//! The crate covers the data path from raw annotated corpora to model-ready
//! tensors:
//!
//! * [`corpus`] - document model (entities, relations, sentences) shared by
//!   every other module.
//! * [`formats`] - parsers and emitters for BRAT standoff, BioCreative-style
//!   TSV, and a JSON interchange format. BRAT and JSON round trips are
//!   lossless; TSV carries no relation ids or provenance.
//! * [`merge`] - corpus merging with entity alignment, relation label
//!   conflict detection, and configurable resolution policies.
//! * [`prep`] - relation-instance generation: sentence-level pairing,
//!   entity masking, synthetic negatives, downsampling, stratified splits,
//!   and class weights.
//! * [`text`] / [`graph`] - preprocessing, WordPiece tokenization, sliding
//!   window co-occurrence counts, and the NPMI-weighted vocabulary graph.
//! * [`matrix`] / [`gcn`] - dense matrix kernel and the two-layer graph
//!   convolution (forward, analytic gradients, feature builders).
//! * [`eval`] - learning-rate schedule, losses, and multi-class
//!   precision/recall/F1 reporting.
//!
//! All randomized operations draw from [`detrand::DetRng`], a ChaCha20-based
//! generator with a documented seed and stream layout, so results are
//! reproducible byte for byte across runs, thread counts, and platforms.
//!
//! With the default `parallel` feature the per-document inner loops run on
//! rayon; disabling it selects sequential fallbacks with identical output.

pub mod corpus;
pub mod detrand;
pub mod eval;
pub mod formats;
pub mod gcn;
pub mod graph;
pub mod matrix;
pub mod merge;
pub mod prep;
pub mod synth;
pub mod text;
