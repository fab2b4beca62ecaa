//! Batch pipeline for finding wash trading in NFT marketplace event data.
//!
//! The pipeline runs in stages: parse and repair raw event exports
//! ([`parse`], [`preprocess`]), split each token's history into activity
//! windows ([`windowing`]), flag suspicious behavior with three detectors
//! ([`roundtrip`], [`unprofitable`], [`hidden`]), mine the findings for
//! recurring trader pairs and groups ([`mining`]), and aggregate everything
//! into market-level measurements ([`analytics`]). [`synthgen`] builds
//! labeled synthetic corpora for end-to-end validation, and [`pipeline`]
//! ties the stages together behind one config struct.

pub mod analytics;
pub mod error;
pub mod hidden;
pub mod mining;
pub mod model;
pub mod parse;
pub mod pipeline;
pub mod preprocess;
pub mod roundtrip;
pub mod synthgen;
pub mod unprofitable;
pub mod windowing;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::DataError;
