//! condlab: a workbench for condensations (bijective homomorphisms) of
//! relational structures.
//!
//! The library decides and cross-validates condensability and
//! bi-condensability, verifies back-and-forth systems of partial
//! condensations, solves bounded and full-length condensation games, tests
//! positive/negative-fragment preservation, and runs the constructive
//! witness procedures (equivalence-class families, the random poset)
//! as mutually checking oracles.

pub mod bfs;
pub mod condensation;
pub mod corpus;
pub mod games;
pub mod logic;
pub mod menagerie;
pub mod structure;
