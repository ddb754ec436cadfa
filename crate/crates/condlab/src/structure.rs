//! Signatures and finite or lazily presented relational structures.
//!
//! Elements of a finite structure are the dense naturals `0..n`, so a
//! structure is fully determined by its signature, its universe size and one
//! canonically ordered tuple set per relation. Two structures are equal
//! exactly when their serialized forms are byte-identical.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("syntax error in structure document: {0}")]
    Syntax(String),
    #[error("duplicate relation name {0:?}")]
    DuplicateRelation(String),
    #[error("relation {0:?} must have arity >= 1")]
    ZeroArity(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("relation {name:?} has arity {expected}, got tuple of length {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("element {element} out of range for universe of size {universe}")]
    OutOfRange { element: usize, universe: usize },
    #[error("structure pair has mismatched signatures")]
    SignatureMismatch,
    #[error("extender failure for family {family:?}: {reason}")]
    ExtenderFailure { family: String, reason: String },
}

/// A finite relational language: relation names with arities.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    relations: Vec<(String, usize)>,
}

impl Signature {
    pub fn new<S: Into<String>>(relations: Vec<(S, usize)>) -> Result<Self, StructureError> {
        let relations: Vec<(String, usize)> =
            relations.into_iter().map(|(n, a)| (n.into(), a)).collect();
        for (i, (name, arity)) in relations.iter().enumerate() {
            if *arity == 0 {
                return Err(StructureError::ZeroArity(name.clone()));
            }
            if relations[..i].iter().any(|(m, _)| m == name) {
                return Err(StructureError::DuplicateRelation(name.clone()));
            }
        }
        Ok(Signature { relations })
    }

    /// The standard one-binary-relation signature used throughout the corpora.
    pub fn binary(name: &str) -> Signature {
        Signature::new(vec![(name, 2)]).expect("valid signature")
    }

    pub fn relations(&self) -> &[(String, usize)] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|(n, _)| n == name)
    }

    pub fn arity(&self, idx: usize) -> usize {
        self.relations[idx].1
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.relations[idx].0
    }
}

/// A finite relational structure over elements `0..n`.
///
/// Tuple sets are kept in sorted order, which makes serialization canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteStructure {
    sig: Signature,
    n: usize,
    rels: Vec<BTreeSet<Vec<usize>>>,
}

impl FiniteStructure {
    /// An empty interpretation for every relation of `sig`.
    pub fn empty(sig: Signature, n: usize) -> FiniteStructure {
        let rels = vec![BTreeSet::new(); sig.len()];
        FiniteStructure { sig, n, rels }
    }

    pub fn new(
        sig: Signature,
        n: usize,
        interpretations: Vec<(&str, Vec<Vec<usize>>)>,
    ) -> Result<FiniteStructure, StructureError> {
        let mut s = FiniteStructure::empty(sig, n);
        for (name, tuples) in interpretations {
            let idx = s
                .sig
                .index_of(name)
                .ok_or_else(|| StructureError::UnknownRelation(name.to_string()))?;
            for t in tuples {
                s.insert_tuple(idx, t)?;
            }
        }
        Ok(s)
    }

    pub fn sig(&self) -> &Signature {
        &self.sig
    }

    pub fn universe_size(&self) -> usize {
        self.n
    }

    pub fn insert_tuple(&mut self, rel: usize, tuple: Vec<usize>) -> Result<(), StructureError> {
        let arity = self.sig.arity(rel);
        if tuple.len() != arity {
            return Err(StructureError::ArityMismatch {
                name: self.sig.name(rel).to_string(),
                expected: arity,
                got: tuple.len(),
            });
        }
        if let Some(&e) = tuple.iter().find(|&&e| e >= self.n) {
            return Err(StructureError::OutOfRange {
                element: e,
                universe: self.n,
            });
        }
        self.rels[rel].insert(tuple);
        Ok(())
    }

    pub fn tuples(&self, rel: usize) -> &BTreeSet<Vec<usize>> {
        &self.rels[rel]
    }

    pub fn has_tuple(&self, rel: usize, tuple: &[usize]) -> bool {
        self.rels[rel].contains(tuple)
    }

    /// Restriction to the initial segment `0..k`: keeps exactly the tuples
    /// whose entries all lie below `k`.
    pub fn restrict(&self, k: usize) -> FiniteStructure {
        let k = k.min(self.n);
        let rels = self
            .rels
            .iter()
            .map(|set| {
                set.iter()
                    .filter(|t| t.iter().all(|&e| e < k))
                    .cloned()
                    .collect()
            })
            .collect();
        FiniteStructure {
            sig: self.sig.clone(),
            n: k,
            rels,
        }
    }

    /// End-extension check: `self` restricted to `other`'s universe equals `other`.
    pub fn end_extends(&self, other: &FiniteStructure) -> bool {
        self.sig == other.sig
            && self.n >= other.n
            && self.restrict(other.n).rels == other.rels
    }

    /// Canonical serialization: keys `sig`, `n`, `rels` in that order,
    /// relations in signature order, tuples sorted, no whitespace.
    pub fn serialize(&self) -> String {
        let mut out = String::from("{\"sig\":[");
        for (i, (name, arity)) in self.sig.relations().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("[{},{}]", json_string(name), arity));
        }
        out.push_str(&format!("],\"n\":{},\"rels\":{{", self.n));
        for (i, (name, _)) in self.sig.relations().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}:[", json_string(name)));
            for (j, tuple) in self.rels[i].iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push('[');
                for (k, e) in tuple.iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    out.push_str(&e.to_string());
                }
                out.push(']');
            }
            out.push(']');
        }
        out.push_str("}}");
        out
    }
}

impl fmt::Display for FiniteStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

/// Parse the JSON structure format.
///
/// Format: `{"sig":[["R",2]],"n":2,"rels":{"R":[[0,0],[1,1]]}}`. Parsing is
/// forgiving about key order and whitespace; serialization is canonical.
pub fn parse_structure(text: &str) -> Result<FiniteStructure, StructureError> {
    #[derive(serde::Deserialize)]
    struct Doc {
        sig: Vec<(String, usize)>,
        n: usize,
        rels: std::collections::BTreeMap<String, Vec<Vec<usize>>>,
    }
    let doc: Doc = serde_json::from_str(text)
        .map_err(|e| StructureError::Syntax(format!("{e} (line {}, column {})", e.line(), e.column())))?;
    let sig = Signature::new(doc.sig)?;
    let mut s = FiniteStructure::empty(sig, doc.n);
    for (name, tuples) in doc.rels {
        let idx = s
            .sig
            .index_of(&name)
            .ok_or(StructureError::UnknownRelation(name))?;
        for t in tuples {
            s.insert_tuple(idx, t)?;
        }
    }
    Ok(s)
}

/// Include each possible tuple independently with probability `density`,
/// deterministically from `seed`.
pub fn generate_random(sig: &Signature, n: usize, density: f64, seed: u64) -> FiniteStructure {
    let density = density.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = FiniteStructure::empty(sig.clone(), n);
    for rel in 0..sig.len() {
        let arity = sig.arity(rel);
        for tuple in all_tuples(n, arity) {
            if rng.gen_bool(density) {
                s.rels[rel].insert(tuple);
            }
        }
    }
    s
}

/// All `arity`-length tuples over `0..n` in lexicographic order.
pub fn all_tuples(n: usize, arity: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.checked_pow(arity as u32).unwrap_or(0);
    (0..total).map(move |mut code| {
        let mut t = vec![0usize; arity];
        for slot in (0..arity).rev() {
            t[slot] = code % n;
            code /= n;
        }
        t
    })
}

/// Exhaustive enumeration of every structure over `sig` with universe `0..n`.
///
/// Only sensible for desk-scale signatures: the count is `2^(sum n^arity)`.
pub fn enumerate_all(sig: &Signature, n: usize) -> impl Iterator<Item = FiniteStructure> + '_ {
    let slots: Vec<(usize, Vec<usize>)> = (0..sig.len())
        .flat_map(|rel| all_tuples(n, sig.arity(rel)).map(move |t| (rel, t)))
        .collect();
    let count: u64 = 1u64 << slots.len().min(63);
    assert!(
        slots.len() < 63,
        "enumerate_all: {} tuple slots is past desk scale",
        slots.len()
    );
    (0..count).map(move |mask| {
        let mut s = FiniteStructure::empty(sig.clone(), n);
        for (bit, (rel, tuple)) in slots.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                s.rels[*rel].insert(tuple.clone());
            }
        }
        s
    })
}

/// A pair of structures over one shared signature, the ambient object of all
/// condensation, game and back-and-forth decisions.
#[derive(Debug, Clone, Copy)]
pub struct StructurePair<'a> {
    left: &'a FiniteStructure,
    right: &'a FiniteStructure,
}

impl<'a> StructurePair<'a> {
    pub fn new(
        left: &'a FiniteStructure,
        right: &'a FiniteStructure,
    ) -> Result<StructurePair<'a>, StructureError> {
        if left.sig() != right.sig() {
            return Err(StructureError::SignatureMismatch);
        }
        Ok(StructurePair { left, right })
    }

    pub fn left(&self) -> &'a FiniteStructure {
        self.left
    }

    pub fn right(&self) -> &'a FiniteStructure {
        self.right
    }

    pub fn sig(&self) -> &'a Signature {
        self.left.sig()
    }

    /// The pair with the roles of the two structures exchanged.
    pub fn flip(&self) -> StructurePair<'a> {
        StructurePair {
            left: self.right,
            right: self.left,
        }
    }
}

/// Family-specific growth procedure behind a [`LazyStructure`].
pub trait Extender {
    /// Return an end-extension of `current` with at least `upto` elements.
    fn extend(
        &mut self,
        current: &FiniteStructure,
        upto: usize,
    ) -> Result<FiniteStructure, StructureError>;

    /// Check the family's declared finite approximation properties.
    fn verify(&self, prefix: &FiniteStructure) -> Result<(), StructureError>;

    fn family(&self) -> &str;
}

/// A countable structure presented by a cached finite prefix plus an extender.
///
/// Successive prefixes are end-extensions: relations restricted to old
/// elements never change. Callers must serialize access to one instance.
pub struct LazyStructure {
    prefix: FiniteStructure,
    extender: Box<dyn Extender>,
}

impl LazyStructure {
    pub fn new(prefix: FiniteStructure, extender: Box<dyn Extender>) -> LazyStructure {
        LazyStructure { prefix, extender }
    }

    pub fn family(&self) -> &str {
        self.extender.family()
    }

    pub fn prefix(&self) -> &FiniteStructure {
        &self.prefix
    }

    /// Explore to exactly `upto` elements. Values below the cached prefix
    /// size return a restriction; larger values grow the prefix first.
    pub fn explore(&mut self, upto: usize) -> Result<FiniteStructure, StructureError> {
        if upto > self.prefix.universe_size() {
            let bigger = self.extender.extend(&self.prefix, upto)?;
            if bigger.universe_size() < upto || !bigger.end_extends(&self.prefix) {
                return Err(StructureError::ExtenderFailure {
                    family: self.extender.family().to_string(),
                    reason: "extender did not return an end-extension of the prefix".to_string(),
                });
            }
            self.extender.verify(&bigger)?;
            self.prefix = bigger;
        }
        Ok(self.prefix.restrict(upto))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const A2: &str = r#"{"sig":[["R",2]],"n":2,"rels":{"R":[[0,0],[1,1]]}}"#;
    pub(crate) const B2: &str = r#"{"sig":[["R",2]],"n":2,"rels":{"R":[[0,0],[0,1],[1,0],[1,1]]}}"#;

    #[test]
    fn parses_a2_and_b2() {
        let a2 = parse_structure(A2).unwrap();
        assert_eq!(a2.universe_size(), 2);
        assert_eq!(a2.tuples(0).len(), 2);
        let b2 = parse_structure(B2).unwrap();
        assert_eq!(b2.tuples(0).len(), 4);
    }

    #[test]
    fn out_of_range_element_rejected() {
        let err = parse_structure(r#"{"sig":[["R",2]],"n":1,"rels":{"R":[[0,1]]}}"#).unwrap_err();
        assert!(matches!(
            err,
            StructureError::OutOfRange {
                element: 1,
                universe: 1
            }
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_structure("{\"sig\": [").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "no position in: {msg}");
    }

    #[test]
    fn arity_mismatch_rejected() {
        let err = parse_structure(r#"{"sig":[["R",2]],"n":2,"rels":{"R":[[0]]}}"#).unwrap_err();
        assert!(matches!(err, StructureError::ArityMismatch { .. }));
    }

    #[test]
    fn serialization_round_trips_and_is_canonical() {
        // Scrambled input normalizes to the canonical byte form.
        let scrambled = r#"{ "rels": {"R": [[1,1],[0,0]]}, "n": 2, "sig": [["R",2]] }"#;
        let s = parse_structure(scrambled).unwrap();
        assert_eq!(s.serialize(), A2);
        let back = parse_structure(&s.serialize()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn random_generation_is_deterministic() {
        let sig = Signature::binary("R");
        let a = generate_random(&sig, 3, 0.5, 42);
        let b = generate_random(&sig, 3, 0.5, 42);
        assert_eq!(a, b);
        assert_eq!(generate_random(&sig, 0, 0.5, 7).universe_size(), 0);
        assert_eq!(generate_random(&sig, 3, 1.0, 1).tuples(0).len(), 9);
    }

    #[test]
    fn enumerate_all_counts() {
        let sig = Signature::binary("R");
        assert_eq!(enumerate_all(&sig, 0).count(), 1);
        assert_eq!(enumerate_all(&sig, 1).count(), 2);
        assert_eq!(enumerate_all(&sig, 2).count(), 16);
    }

    struct CountingFamily;

    impl Extender for CountingFamily {
        fn extend(
            &mut self,
            current: &FiniteStructure,
            upto: usize,
        ) -> Result<FiniteStructure, StructureError> {
            // Linear order 0 < 1 < 2 < ... as a growing prefix.
            let mut s = FiniteStructure::empty(current.sig().clone(), upto);
            for i in 0..upto {
                for j in i + 1..upto {
                    s.insert_tuple(0, vec![i, j])?;
                }
            }
            Ok(s)
        }

        fn verify(&self, prefix: &FiniteStructure) -> Result<(), StructureError> {
            let expected = prefix.universe_size() * (prefix.universe_size().saturating_sub(1)) / 2;
            if prefix.tuples(0).len() != expected {
                return Err(StructureError::ExtenderFailure {
                    family: "omega-chain".to_string(),
                    reason: "prefix is not an initial chain".to_string(),
                });
            }
            Ok(())
        }

        fn family(&self) -> &str {
            "omega-chain"
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn mixed_sig() -> Signature {
            Signature::new(vec![("R", 2), ("S", 1)]).unwrap()
        }

        proptest! {
            #[test]
            fn serialization_round_trips(
                n in 0usize..6,
                density in 0.0f64..=1.0,
                seed in any::<u64>(),
            ) {
                let s = generate_random(&mixed_sig(), n, density, seed);
                let back = parse_structure(&s.serialize()).unwrap();
                prop_assert_eq!(&back, &s);
                prop_assert_eq!(back.serialize(), s.serialize());
            }

            #[test]
            fn equality_matches_byte_identity(
                n in 0usize..4,
                d1 in 0.0f64..=1.0,
                d2 in 0.0f64..=1.0,
                s1 in any::<u64>(),
                s2 in any::<u64>(),
            ) {
                let a = generate_random(&mixed_sig(), n, d1, s1);
                let b = generate_random(&mixed_sig(), n, d2, s2);
                prop_assert_eq!(a == b, a.serialize() == b.serialize());
            }

            #[test]
            fn restriction_is_monotone(
                n in 0usize..6,
                k in 0usize..6,
                density in 0.0f64..=1.0,
                seed in any::<u64>(),
            ) {
                let s = generate_random(&mixed_sig(), n, density, seed);
                let r = s.restrict(k);
                prop_assert!(s.end_extends(&r));
                prop_assert_eq!(r.restrict(k), s.restrict(k.min(n)));
            }
        }
    }

    #[test]
    fn lazy_exploration_is_end_extending_and_idempotent() {
        let sig = Signature::binary("R");
        let mut lazy = LazyStructure::new(
            FiniteStructure::empty(sig, 0),
            Box::new(CountingFamily),
        );
        let p3 = lazy.explore(3).unwrap();
        assert_eq!(p3.universe_size(), 3);
        assert!(p3.has_tuple(0, &[0, 1]) && p3.has_tuple(0, &[1, 2]) && p3.has_tuple(0, &[0, 2]));
        let p3_again = lazy.explore(3).unwrap();
        assert_eq!(p3, p3_again);
        let p5 = lazy.explore(5).unwrap();
        assert!(p5.end_extends(&p3));
        // Shrinking exploration is a plain restriction.
        let p2 = lazy.explore(2).unwrap();
        assert_eq!(p2, p5.restrict(2));
        assert_eq!(lazy.explore(0).unwrap().universe_size(), 0);
    }
}
