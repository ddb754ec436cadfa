//! Partial condensations and the direct decision of condensability and
//! bi-condensability on finite structures.
//!
//! A partial condensation is a finite injective partial map that preserves
//! every relation forward: tuples may be gained under the map, never lost.
//! `check_partial` verifies the three defining clauses and reports a failing
//! quantifier-free positive formula kind when one is violated.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::structure::{FiniteStructure, StructurePair};

pub const UNMAPPED: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum CondensationError {
    #[error("pair ({x},{y}) out of range for universes of sizes {left} and {right}")]
    PairOutOfRange {
        x: usize,
        y: usize,
        left: usize,
        right: usize,
    },
    #[error("finite structures only: got a lazy or oversized input")]
    NotFinite,
}

/// A finite injective partial map preserving relations forward.
///
/// Values are produced by [`check_partial`] or by solvers that maintain the
/// invariants internally; the pair list is kept sorted by left element, so
/// equal maps compare equal structurally.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct PartialCondensation {
    pairs: Vec<(usize, usize)>,
}

impl PartialCondensation {
    pub fn empty() -> PartialCondensation {
        PartialCondensation { pairs: Vec::new() }
    }

    /// Construct from pairs already known functional and injective.
    pub(crate) fn from_sorted(pairs: Vec<(usize, usize)>) -> PartialCondensation {
        debug_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0));
        PartialCondensation { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn image(&self, x: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&x, |p| p.0)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    pub fn preimage(&self, y: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.1 == y).map(|p| p.0)
    }

    pub fn domain(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|p| p.0)
    }

    pub fn range(&self) -> impl Iterator<Item = usize> + '_ {
        self.pairs.iter().map(|p| p.1)
    }

    /// The map extended by `(x, y)`, or `None` if that breaks functionality
    /// or injectivity. Forward preservation is the caller's concern.
    pub fn extended(&self, x: usize, y: usize) -> Option<PartialCondensation> {
        match self.image(x) {
            Some(old) if old == y => Some(self.clone()),
            Some(_) => None,
            None => {
                if self.pairs.iter().any(|p| p.1 == y) {
                    return None;
                }
                let mut pairs = self.pairs.clone();
                let at = pairs.partition_point(|p| p.0 < x);
                pairs.insert(at, (x, y));
                Some(PartialCondensation { pairs })
            }
        }
    }

    pub fn is_restriction_of(&self, other: &PartialCondensation) -> bool {
        self.pairs.iter().all(|p| other.image(p.0) == Some(p.1))
    }
}

/// The failing quantifier-free positive formula kind, mirroring the three
/// clause families of the partial-condensation characterization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PcViolation {
    /// An equality atom is lost: x is sent to two distinct images.
    NotFunctional { x: usize, y1: usize, y2: usize },
    /// An inequality atom is lost: two distinct elements share an image.
    NotInjective { x1: usize, x2: usize, y: usize },
    /// A relation atom is lost: a tuple of the left structure maps outside
    /// the right interpretation.
    TupleLoss {
        relation: String,
        tuple: Vec<usize>,
        image: Vec<usize>,
    },
}

impl std::fmt::Display for PcViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PcViolation::NotFunctional { x, y1, y2 } => {
                write!(f, "equality violated: {x} mapped to both {y1} and {y2}")
            }
            PcViolation::NotInjective { x1, x2, y } => {
                write!(f, "inequality violated: {x1} and {x2} both mapped to {y}")
            }
            PcViolation::TupleLoss {
                relation,
                tuple,
                image,
            } => write!(
                f,
                "relation {relation} violated: tuple {tuple:?} maps to {image:?} which is absent"
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CheckOutcome {
    Accepted(PartialCondensation),
    Violation(PcViolation),
}

impl CheckOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, CheckOutcome::Accepted(_))
    }

    pub fn accepted(self) -> Option<PartialCondensation> {
        match self {
            CheckOutcome::Accepted(pc) => Some(pc),
            CheckOutcome::Violation(_) => None,
        }
    }
}

/// Check the three partial-condensation clauses for a raw pair set.
pub fn check_partial(
    pair: StructurePair<'_>,
    raw_pairs: &[(usize, usize)],
) -> Result<CheckOutcome, CondensationError> {
    let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
    for &(x, y) in raw_pairs {
        if x >= ln || y >= rn {
            return Err(CondensationError::PairOutOfRange {
                x,
                y,
                left: ln,
                right: rn,
            });
        }
    }
    let mut pairs: Vec<(usize, usize)> = raw_pairs.to_vec();
    pairs.sort_unstable();
    pairs.dedup();
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            return Ok(CheckOutcome::Violation(PcViolation::NotFunctional {
                x: w[0].0,
                y1: w[0].1,
                y2: w[1].1,
            }));
        }
    }
    let mut by_right: Vec<(usize, usize)> = pairs.iter().map(|&(x, y)| (y, x)).collect();
    by_right.sort_unstable();
    for w in by_right.windows(2) {
        if w[0].0 == w[1].0 {
            return Ok(CheckOutcome::Violation(PcViolation::NotInjective {
                x1: w[0].1,
                x2: w[1].1,
                y: w[0].0,
            }));
        }
    }
    let pc = PartialCondensation::from_sorted(pairs);
    if let Some(v) = forward_violation(pair, &pc) {
        return Ok(CheckOutcome::Violation(v));
    }
    Ok(CheckOutcome::Accepted(pc))
}

fn forward_violation(pair: StructurePair<'_>, pc: &PartialCondensation) -> Option<PcViolation> {
    let sig = pair.sig();
    for rel in 0..sig.len() {
        for tuple in pair.left().tuples(rel) {
            let image: Option<Vec<usize>> = tuple.iter().map(|&e| pc.image(e)).collect();
            if let Some(image) = image {
                if !pair.right().has_tuple(rel, &image) {
                    return Some(PcViolation::TupleLoss {
                        relation: sig.name(rel).to_string(),
                        tuple: tuple.clone(),
                        image,
                    });
                }
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Shared fast-path machinery
// ---------------------------------------------------------------------------

/// Precomputed lookup tables for one ordered structure pair. All the search
/// procedures (backtracking, games, round systems, fixed points) run their
/// inner forward checks through this.
pub(crate) struct PairCtx<'a> {
    pub pair: StructurePair<'a>,
    /// Flattened (relation, tuple) list of the left structure.
    left_tuples: Vec<(usize, Vec<usize>)>,
    /// For each left element, the indices of left tuples mentioning it.
    by_elem: Vec<Vec<u32>>,
    /// Right tuple membership, packed 16 bits per entry when possible.
    right_packed: Option<Vec<HashSet<u64>>>,
}

impl<'a> PairCtx<'a> {
    pub fn new(pair: StructurePair<'a>) -> PairCtx<'a> {
        let sig = pair.sig();
        let mut left_tuples = Vec::new();
        for rel in 0..sig.len() {
            for t in pair.left().tuples(rel) {
                left_tuples.push((rel, t.clone()));
            }
        }
        let mut by_elem = vec![Vec::new(); pair.left().universe_size()];
        for (i, (_, t)) in left_tuples.iter().enumerate() {
            for &e in t {
                if !by_elem[e].contains(&(i as u32)) {
                    by_elem[e].push(i as u32);
                }
            }
        }
        let packable = pair.right().universe_size() < (1 << 16)
            && (0..sig.len()).all(|r| sig.arity(r) <= 4);
        let right_packed = packable.then(|| {
            (0..sig.len())
                .map(|rel| {
                    pair.right()
                        .tuples(rel)
                        .iter()
                        .map(|t| pack(t))
                        .collect::<HashSet<u64>>()
                })
                .collect()
        });
        PairCtx {
            pair,
            left_tuples,
            by_elem,
            right_packed,
        }
    }

    pub fn left_size(&self) -> usize {
        self.pair.left().universe_size()
    }

    pub fn right_size(&self) -> usize {
        self.pair.right().universe_size()
    }

    fn right_has(&self, rel: usize, image: &[usize]) -> bool {
        match &self.right_packed {
            Some(sets) => sets[rel].contains(&pack(image)),
            None => self.pair.right().has_tuple(rel, image),
        }
    }

    /// Would extending `assign` (left element -> right element, `UNMAPPED`
    /// when uncovered) by `x -> y` keep every newly covered tuple preserved?
    pub fn extend_ok(&self, assign: &[u32], x: usize, y: usize) -> bool {
        let mut image = [0usize; 8];
        'tuples: for &ti in &self.by_elem[x] {
            let (rel, tuple) = &self.left_tuples[ti as usize];
            if tuple.len() > 8 {
                // arity beyond the scratch buffer: build the image slowly
                let mut img = Vec::with_capacity(tuple.len());
                for &e in tuple {
                    let v = if e == x { y as u32 } else { assign[e] };
                    if v == UNMAPPED {
                        continue 'tuples;
                    }
                    img.push(v as usize);
                }
                if !self.right_has(*rel, &img) {
                    return false;
                }
                continue;
            }
            for (slot, &e) in tuple.iter().enumerate() {
                let v = if e == x { y as u32 } else { assign[e] };
                if v == UNMAPPED {
                    continue 'tuples;
                }
                image[slot] = v as usize;
            }
            if !self.right_has(*rel, &image[..tuple.len()]) {
                return false;
            }
        }
        true
    }
}

fn pack(tuple: &[usize]) -> u64 {
    let mut code = 0u64;
    for &e in tuple {
        code = code << 16 | e as u64;
    }
    code
}

/// A set of partial condensations with O(1) one-step extension probes when
/// the pair is small enough to pack a map into four bits per left element.
pub(crate) struct PcSet {
    packed: Option<HashSet<u64>>,
    general: Option<BTreeSet<PartialCondensation>>,
}

fn pack_pairs(pairs: &[(usize, usize)]) -> u64 {
    let mut code = 0u64;
    for &(x, y) in pairs {
        code |= (y as u64 + 1) << (4 * x);
    }
    code
}

impl PcSet {
    pub fn new(left_size: usize, right_size: usize) -> PcSet {
        if left_size <= 16 && right_size <= 15 {
            PcSet {
                packed: Some(HashSet::new()),
                general: None,
            }
        } else {
            PcSet {
                packed: None,
                general: Some(BTreeSet::new()),
            }
        }
    }

    pub fn from_members<'a>(
        members: impl IntoIterator<Item = &'a PartialCondensation>,
        left_size: usize,
        right_size: usize,
    ) -> PcSet {
        let mut set = PcSet::new(left_size, right_size);
        for m in members {
            set.insert(m);
        }
        set
    }

    pub fn insert(&mut self, pc: &PartialCondensation) {
        match (&mut self.packed, &mut self.general) {
            (Some(p), _) => {
                p.insert(pack_pairs(pc.pairs()));
            }
            (None, Some(g)) => {
                g.insert(pc.clone());
            }
            (None, None) => unreachable!(),
        }
    }

    /// Membership of `pc` extended by the fresh pair `(x, y)`.
    pub fn contains_one_step(&self, pc: &PartialCondensation, x: usize, y: usize) -> bool {
        match (&self.packed, &self.general) {
            (Some(p), _) => {
                let code = pack_pairs(pc.pairs()) | (y as u64 + 1) << (4 * x);
                p.contains(&code)
            }
            (None, Some(g)) => pc.extended(x, y).is_some_and(|e| g.contains(&e)),
            (None, None) => unreachable!(),
        }
    }
}


pub(crate) fn assignment_of(pc: &PartialCondensation, left_size: usize) -> Vec<u32> {
    let mut assign = vec![UNMAPPED; left_size];
    for &(x, y) in pc.pairs() {
        assign[x] = y as u32;
    }
    assign
}

/// Enumerate every partial condensation of the pair by incremental
/// backtracking over the left universe.
pub fn all_partial_condensations(pair: StructurePair<'_>) -> Vec<PartialCondensation> {
    let ctx = PairCtx::new(pair);
    let mut assign = vec![UNMAPPED; ctx.left_size()];
    let mut used = vec![false; ctx.right_size()];
    let mut out = Vec::new();
    fn recurse(
        ctx: &PairCtx<'_>,
        x: usize,
        assign: &mut Vec<u32>,
        used: &mut Vec<bool>,
        out: &mut Vec<PartialCondensation>,
    ) {
        if x == ctx.left_size() {
            let pairs: Vec<(usize, usize)> = assign
                .iter()
                .enumerate()
                .filter(|&(_, &y)| y != UNMAPPED)
                .map(|(x, &y)| (x, y as usize))
                .collect();
            out.push(PartialCondensation::from_sorted(pairs));
            return;
        }
        recurse(ctx, x + 1, assign, used, out);
        for y in 0..ctx.right_size() {
            if !used[y] && ctx.extend_ok(assign, x, y) {
                assign[x] = y as u32;
                used[y] = true;
                recurse(ctx, x + 1, assign, used, out);
                assign[x] = UNMAPPED;
                used[y] = false;
            }
        }
    }
    recurse(&ctx, 0, &mut assign, &mut used, &mut out);
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// Condensability decisions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

/// A total bijective homomorphism, stored as the image array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CondensationWitness {
    pub map: Vec<usize>,
    pub direction: Direction,
}

impl CondensationWitness {
    pub fn as_partial(&self) -> PartialCondensation {
        PartialCondensation::from_sorted(
            self.map.iter().copied().enumerate().collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum NotCondensableCertificate {
    CardinalityMismatch { left: usize, right: usize },
    /// The backtracking search exhausted every extension order.
    Exhausted { nodes_explored: u64 },
}

#[derive(Debug, Clone)]
pub enum CondensationDecision {
    Condensable(CondensationWitness),
    NotCondensable(NotCondensableCertificate),
}

impl CondensationDecision {
    pub fn is_condensable(&self) -> bool {
        matches!(self, CondensationDecision::Condensable(_))
    }

    pub fn witness(&self) -> Option<&CondensationWitness> {
        match self {
            CondensationDecision::Condensable(w) => Some(w),
            CondensationDecision::NotCondensable(_) => None,
        }
    }
}

/// Decide whether a condensation from the left structure onto the right one
/// exists: backtracking over bijections, extending one element at a time
/// with forward checking, picking the left element with the fewest
/// compatible right elements first.
pub fn decide_condensable(pair: StructurePair<'_>) -> CondensationDecision {
    let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
    if ln != rn {
        return CondensationDecision::NotCondensable(
            NotCondensableCertificate::CardinalityMismatch {
                left: ln,
                right: rn,
            },
        );
    }
    let ctx = PairCtx::new(pair);
    let mut assign = vec![UNMAPPED; ln];
    let mut used = vec![false; rn];
    let mut nodes = 0u64;
    if search(&ctx, &mut assign, &mut used, &mut nodes) {
        let map = assign.iter().map(|&y| y as usize).collect();
        CondensationDecision::Condensable(CondensationWitness {
            map,
            direction: Direction::LeftToRight,
        })
    } else {
        CondensationDecision::NotCondensable(NotCondensableCertificate::Exhausted {
            nodes_explored: nodes,
        })
    }
}

fn search(ctx: &PairCtx<'_>, assign: &mut Vec<u32>, used: &mut Vec<bool>, nodes: &mut u64) -> bool {
    *nodes += 1;
    // Fail-first: extend the left element with the fewest compatible images.
    let mut best: Option<(usize, Vec<usize>)> = None;
    for x in 0..ctx.left_size() {
        if assign[x] != UNMAPPED {
            continue;
        }
        let cands: Vec<usize> = (0..ctx.right_size())
            .filter(|&y| !used[y] && ctx.extend_ok(assign, x, y))
            .collect();
        let better = best.as_ref().is_none_or(|(_, b)| cands.len() < b.len());
        if better {
            let exhausted = cands.is_empty();
            best = Some((x, cands));
            if exhausted {
                return false;
            }
        }
    }
    let Some((x, cands)) = best else {
        return true; // total map reached
    };
    for y in cands {
        assign[x] = y as u32;
        used[y] = true;
        if search(ctx, assign, used, nodes) {
            return true;
        }
        assign[x] = UNMAPPED;
        used[y] = false;
    }
    false
}

#[derive(Debug, Clone)]
pub enum BicondensabilityDecision {
    Yes {
        forward: CondensationWitness,
        backward: CondensationWitness,
    },
    No {
        failing: Direction,
        certificate: NotCondensableCertificate,
    },
}

impl BicondensabilityDecision {
    pub fn is_bicondensable(&self) -> bool {
        matches!(self, BicondensabilityDecision::Yes { .. })
    }
}

/// Conjunction of `decide_condensable` in both directions.
pub fn decide_bicondensable(pair: StructurePair<'_>) -> BicondensabilityDecision {
    let forward = match decide_condensable(pair) {
        CondensationDecision::Condensable(w) => w,
        CondensationDecision::NotCondensable(c) => {
            return BicondensabilityDecision::No {
                failing: Direction::LeftToRight,
                certificate: c,
            }
        }
    };
    match decide_condensable(pair.flip()) {
        CondensationDecision::Condensable(mut w) => {
            w.direction = Direction::RightToLeft;
            BicondensabilityDecision::Yes {
                forward,
                backward: w,
            }
        }
        CondensationDecision::NotCondensable(c) => BicondensabilityDecision::No {
            failing: Direction::RightToLeft,
            certificate: c,
        },
    }
}

// ---------------------------------------------------------------------------
// Reversibility of finite structures
// ---------------------------------------------------------------------------

/// Every bijective self-homomorphism of the structure, by plain enumeration
/// of all `n!` bijections filtered through the forward condition.
pub fn all_condensations(pair: StructurePair<'_>) -> Vec<Vec<usize>> {
    let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
    if ln != rn {
        return Vec::new();
    }
    let ctx = PairCtx::new(pair);
    let mut out = Vec::new();
    permute(&ctx, &mut Vec::with_capacity(ln), &mut vec![false; rn], &mut out);
    out.retain(|map| is_condensation(pair, map));
    out
}

fn permute(ctx: &PairCtx<'_>, map: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
    if map.len() == ctx.left_size() {
        out.push(map.clone());
        return;
    }
    for y in 0..ctx.right_size() {
        if used[y] {
            continue;
        }
        map.push(y);
        used[y] = true;
        permute(ctx, map, used, out);
        used[y] = false;
        map.pop();
    }
}

fn is_condensation(pair: StructurePair<'_>, map: &[usize]) -> bool {
    let sig = pair.sig();
    let mut image = Vec::new();
    for rel in 0..sig.len() {
        for t in pair.left().tuples(rel) {
            image.clear();
            image.extend(t.iter().map(|&e| map[e]));
            if !pair.right().has_tuple(rel, &image) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Serialize)]
pub struct ReversibilityReport {
    pub universe: usize,
    pub condensation_count: usize,
    pub automorphism_count: usize,
    pub reversible: bool,
}

/// Enumerate all self-condensations of a finite structure and verify each is
/// an automorphism. A finite bijective homomorphism cannot strictly add
/// tuples, so this must always report reversible; a failure is an
/// implementation bug, not a mathematical possibility.
pub fn finite_reversibility_sanity(s: &FiniteStructure) -> ReversibilityReport {
    let pair = StructurePair::new(s, s).expect("self pair shares its signature");
    let mut cond = 0usize;
    let mut aut = 0usize;
    let ctx = PairCtx::new(pair);
    let mut maps = Vec::new();
    permute(&ctx, &mut Vec::new(), &mut vec![false; s.universe_size()], &mut maps);
    for map in &maps {
        if !is_condensation(pair, map) {
            continue;
        }
        cond += 1;
        // Automorphism check: the inverse preserves relations too.
        let mut inverse = vec![0usize; map.len()];
        for (x, &y) in map.iter().enumerate() {
            inverse[y] = x;
        }
        if is_condensation(pair, &inverse) {
            aut += 1;
        }
    }
    ReversibilityReport {
        universe: s.universe_size(),
        condensation_count: cond,
        automorphism_count: aut,
        reversible: cond == aut,
    }
}
