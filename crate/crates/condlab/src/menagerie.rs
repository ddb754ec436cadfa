//! Constructors for the witness structures and constructive procedures:
//! countable equivalence relations with infinitely many singletons and
//! arbitrarily large classes (built by a deterministic interleaving
//! schedule), the explicit four-case game strategy and greedy condensation
//! builder for that class, the truncated witness pair separating the
//! positive fragment from its infinitary strengthening, and the random
//! poset presented through its extension-property oracle.

#![allow(clippy::needless_range_loop)] // index loops double as element ids

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bfs::{BadCondensation, BfsError, ExtensionCase, SelfExtensionOracle};
use crate::condensation::{check_partial, CheckOutcome, PartialCondensation};
use crate::games::{GameError, Responder, Side, TranscriptEntry};
use crate::logic::Formula;
use crate::structure::{
    Extender, FiniteStructure, LazyStructure, Signature, StructureError, StructurePair,
};

#[derive(Debug, Error)]
pub enum MenagerieError {
    #[error("inconsistent spec: {0}")]
    InvalidSpec(String),
    #[error("level {requested} exceeds the spec capacity {capacity}")]
    LevelBeyondCapacity { capacity: usize, requested: usize },
    #[error("spec describes a finite structure; a full class member is required: {0}")]
    NotClassC(String),
    #[error("structure is not an equivalence relation: {0}")]
    NotEquivalence(String),
    #[error("precondition failure: {0}")]
    Precondition(String),
    #[error("obstruction: {0}")]
    Obstruction(String),
    #[error("request rejected: {reason}{}", pair.map(|(a, b)| format!(" (witnessed by elements {a}, {b})")).unwrap_or_default())]
    RequestRejected {
        reason: String,
        pair: Option<(usize, usize)>,
    },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

// ---------------------------------------------------------------------------
// Class-C equivalence structures
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingletonBudget {
    Finite(usize),
    Omega,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassSizes {
    /// A fixed multiset of class sizes, each at least 2.
    Explicit(Vec<usize>),
    /// All sizes from the given bound upward: k, k+1, k+2, ...
    AllFrom(usize),
}

/// A recipe for an equivalence structure: so many singleton classes, a
/// stream of finite class sizes, and a number of infinite classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCSpec {
    pub singletons: SingletonBudget,
    pub finite_class_sizes: ClassSizes,
    pub infinite_classes: usize,
}

impl ClassCSpec {
    pub fn validate(&self) -> Result<(), MenagerieError> {
        match &self.finite_class_sizes {
            ClassSizes::Explicit(sizes) => {
                if let Some(&s) = sizes.iter().find(|&&s| s < 2) {
                    return Err(MenagerieError::InvalidSpec(format!(
                        "finite class size {s} below 2; singleton classes go in the singleton budget"
                    )));
                }
            }
            ClassSizes::AllFrom(k) => {
                if *k < 2 {
                    return Err(MenagerieError::InvalidSpec(
                        "unbounded size stream must start at 2 or above".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Total element count for fully finite specs.
    pub fn capacity(&self) -> Option<usize> {
        match (&self.singletons, &self.finite_class_sizes, self.infinite_classes) {
            (SingletonBudget::Finite(s), ClassSizes::Explicit(sizes), 0) => {
                Some(s + sizes.iter().sum::<usize>())
            }
            _ => None,
        }
    }

    pub fn has_infinite_class(&self) -> bool {
        self.infinite_classes > 0
    }

    /// Membership in the witness class proper: infinitely many singletons
    /// and arbitrarily large classes.
    pub fn is_class_c_member(&self) -> Result<(), MenagerieError> {
        if self.singletons != SingletonBudget::Omega {
            return Err(MenagerieError::NotClassC(
                "finitely many singleton classes".to_string(),
            ));
        }
        let unbounded = matches!(self.finite_class_sizes, ClassSizes::AllFrom(_))
            || self.infinite_classes > 0;
        if !unbounded {
            return Err(MenagerieError::NotClassC(
                "class sizes are bounded".to_string(),
            ));
        }
        Ok(())
    }

    /// All-finite-classes members of the witness class.
    pub fn is_fin_style(&self) -> bool {
        self.infinite_classes == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Singleton,
    Finite { target: usize },
    Infinite,
}

#[derive(Debug, Clone)]
pub struct ClassInfo {
    pub kind: ClassKind,
    pub members: Vec<usize>,
}

/// The class structure of a prefix: element-to-class assignment plus the
/// classes in birth order.
#[derive(Debug, Clone)]
pub struct ClassAssignment {
    pub class_of: Vec<usize>,
    pub classes: Vec<ClassInfo>,
}

impl ClassAssignment {
    pub fn singleton_count(&self) -> usize {
        self.classes
            .iter()
            .filter(|c| c.kind == ClassKind::Singleton)
            .count()
    }

    pub fn max_class_size(&self) -> usize {
        self.classes.iter().map(|c| c.members.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    At(usize),
    Full,
}

/// Replay the deterministic interleaving schedule to `level` elements: each
/// cycle emits one new singleton, one element of each infinite class in
/// round-robin, and one element of the current finite class, skipping
/// exhausted streams. Prefixes at increasing levels are end-extensions.
pub fn class_assignment(spec: &ClassCSpec, level: Level) -> Result<ClassAssignment, MenagerieError> {
    spec.validate()?;
    let level = match level {
        Level::At(k) => {
            if let Some(cap) = spec.capacity() {
                if k > cap {
                    return Err(MenagerieError::LevelBeyondCapacity {
                        capacity: cap,
                        requested: k,
                    });
                }
            }
            k
        }
        Level::Full => spec.capacity().ok_or_else(|| {
            MenagerieError::InvalidSpec(
                "full materialization requires a fully finite spec".to_string(),
            )
        })?,
    };
    let mut class_of: Vec<usize> = Vec::with_capacity(level);
    let mut classes: Vec<ClassInfo> = Vec::new();
    let mut singleton_emitted = 0usize;
    let mut infinite_ids: Vec<usize> = Vec::new();
    let mut infinite_rr = 0usize;
    let mut finite_pos = 0usize; // index into the size stream
    let mut finite_open: Option<usize> = None; // class id being filled
    let size_at = |pos: usize| -> Option<usize> {
        match &spec.finite_class_sizes {
            ClassSizes::Explicit(sizes) => sizes.get(pos).copied(),
            ClassSizes::AllFrom(k) => Some(k + pos),
        }
    };
    while class_of.len() < level {
        let before = class_of.len();
        // Stream 1: a fresh singleton class.
        let singleton_budget_left = match spec.singletons {
            SingletonBudget::Finite(s) => singleton_emitted < s,
            SingletonBudget::Omega => true,
        };
        if singleton_budget_left && class_of.len() < level {
            let id = classes.len();
            classes.push(ClassInfo {
                kind: ClassKind::Singleton,
                members: vec![class_of.len()],
            });
            class_of.push(id);
            singleton_emitted += 1;
        }
        // Stream 2: one element of one infinite class, round-robin.
        if spec.infinite_classes > 0 && class_of.len() < level {
            if infinite_ids.len() < spec.infinite_classes {
                let id = classes.len();
                classes.push(ClassInfo {
                    kind: ClassKind::Infinite,
                    members: Vec::new(),
                });
                infinite_ids.push(id);
            }
            let id = infinite_ids[infinite_rr % infinite_ids.len()];
            classes[id].members.push(class_of.len());
            class_of.push(id);
            infinite_rr += 1;
        }
        // Stream 3: one element of the current finite class.
        if class_of.len() < level {
            if let Some(target) = size_at(finite_pos) {
                let id = *finite_open.get_or_insert_with(|| {
                    classes.push(ClassInfo {
                        kind: ClassKind::Finite { target },
                        members: Vec::new(),
                    });
                    classes.len() - 1
                });
                classes[id].members.push(class_of.len());
                class_of.push(id);
                if classes[id].members.len() == target {
                    finite_open = None;
                    finite_pos += 1;
                }
            }
        }
        if class_of.len() == before {
            return Err(MenagerieError::LevelBeyondCapacity {
                capacity: before,
                requested: level,
            });
        }
    }
    Ok(ClassAssignment { class_of, classes })
}

/// The equivalence structure (one binary relation, interpreted reflexive,
/// symmetric and transitive) realizing a spec at the given level.
pub fn build_class_c(spec: &ClassCSpec, level: Level) -> Result<FiniteStructure, MenagerieError> {
    let assignment = class_assignment(spec, level)?;
    Ok(equivalence_structure_of(&assignment))
}

fn equivalence_structure_of(assignment: &ClassAssignment) -> FiniteStructure {
    let n = assignment.class_of.len();
    let mut s = FiniteStructure::empty(Signature::binary("R"), n);
    for class in &assignment.classes {
        for &a in &class.members {
            for &b in &class.members {
                s.insert_tuple(0, vec![a, b]).expect("members are in range");
            }
        }
    }
    s
}

struct ClassCExtender {
    spec: ClassCSpec,
}

impl Extender for ClassCExtender {
    fn extend(
        &mut self,
        _current: &FiniteStructure,
        upto: usize,
    ) -> Result<FiniteStructure, StructureError> {
        build_class_c(&self.spec, Level::At(upto))
            .map_err(|e| StructureError::ExtenderFailure {
                family: "class-C".to_string(),
                reason: e.to_string(),
            })
    }

    fn verify(&self, prefix: &FiniteStructure) -> Result<(), StructureError> {
        let replayed = build_class_c(&self.spec, Level::At(prefix.universe_size()))
            .map_err(|e| StructureError::ExtenderFailure {
                family: "class-C".to_string(),
                reason: e.to_string(),
            })?;
        if &replayed != prefix {
            return Err(StructureError::ExtenderFailure {
                family: "class-C".to_string(),
                reason: "prefix diverges from the schedule".to_string(),
            });
        }
        Ok(())
    }

    fn family(&self) -> &str {
        "class-C"
    }
}

/// A lazily explorable presentation of an (in general infinite) spec.
pub fn class_c_lazy(spec: ClassCSpec) -> Result<LazyStructure, MenagerieError> {
    spec.validate()?;
    let prefix = build_class_c(&spec, Level::At(0))?;
    Ok(LazyStructure::new(prefix, Box::new(ClassCExtender { spec })))
}

/// Read the class partition off a finite structure, verifying that its
/// single binary relation is an equivalence. Classes come sorted by their
/// least element.
pub fn classes_of(s: &FiniteStructure) -> Result<Vec<Vec<usize>>, MenagerieError> {
    if s.sig().len() != 1 || s.sig().arity(0) != 2 {
        return Err(MenagerieError::NotEquivalence(
            "expected one binary relation".to_string(),
        ));
    }
    let n = s.universe_size();
    for a in 0..n {
        if !s.has_tuple(0, &[a, a]) {
            return Err(MenagerieError::NotEquivalence(format!("{a} not reflexive")));
        }
    }
    for t in s.tuples(0) {
        let (a, b) = (t[0], t[1]);
        if !s.has_tuple(0, &[b, a]) {
            return Err(MenagerieError::NotEquivalence(format!(
                "pair ({a},{b}) not symmetric"
            )));
        }
        for c in 0..n {
            if s.has_tuple(0, &[b, c]) && !s.has_tuple(0, &[a, c]) {
                return Err(MenagerieError::NotEquivalence(format!(
                    "pairs ({a},{b}),({b},{c}) not transitive"
                )));
            }
        }
    }
    let mut seen = vec![false; n];
    let mut classes = Vec::new();
    for a in 0..n {
        if seen[a] {
            continue;
        }
        let class: Vec<usize> = (a..n).filter(|&b| s.has_tuple(0, &[a, b])).collect();
        for &b in &class {
            seen[b] = true;
        }
        classes.push(class);
    }
    Ok(classes)
}

// ---------------------------------------------------------------------------
// The explicit strategy
// ---------------------------------------------------------------------------

/// The four-case strategy for player II on a pair of equivalence-structure
/// prefixes: repeated elements are answered by the earlier response; a fresh
/// left element is answered by the least unused element of a fixed large
/// class of the right structure; a fresh right element by the least unused
/// singleton of the left structure.
#[derive(Debug, Clone)]
pub struct SigmaStrategy {
    rounds: usize,
    left_singletons: Vec<usize>,
    right_class: Vec<usize>,
}

impl SigmaStrategy {
    pub fn rounds(&self) -> usize {
        self.rounds
    }
}

/// Build the strategy for the n-round game, checking its preconditions: the
/// left prefix carries at least n singleton classes and the right prefix a
/// class of size at least n.
pub fn claim_strategy_sigma(
    left: &FiniteStructure,
    right: &FiniteStructure,
    rounds: usize,
) -> Result<SigmaStrategy, MenagerieError> {
    let left_classes = classes_of(left)?;
    let right_classes = classes_of(right)?;
    let left_singletons: Vec<usize> = left_classes
        .iter()
        .filter(|c| c.len() == 1)
        .map(|c| c[0])
        .collect();
    if left_singletons.len() < rounds {
        return Err(MenagerieError::Precondition(format!(
            "left prefix has {} singletons, need {rounds}",
            left_singletons.len()
        )));
    }
    let right_class = if rounds == 0 {
        Vec::new()
    } else {
        right_classes
            .iter()
            .find(|c| c.len() >= rounds)
            .cloned()
            .ok_or_else(|| {
                MenagerieError::Precondition(format!(
                    "right prefix has no class of size {rounds}"
                ))
            })?
    };
    Ok(SigmaStrategy {
        rounds,
        left_singletons,
        right_class,
    })
}

impl Responder for SigmaStrategy {
    fn respond(
        &self,
        pair: StructurePair<'_>,
        history: &[TranscriptEntry],
        side: Side,
        elem: usize,
    ) -> Result<usize, GameError> {
        let universe = match side {
            Side::Left => pair.left().universe_size(),
            Side::Right => pair.right().universe_size(),
        };
        if elem >= universe {
            return Err(GameError::IllegalMove {
                side,
                elem,
                universe,
            });
        }
        // Cases 1 and 2: a repeated element gets the repeated response.
        for e in history {
            let (x, y) = e.pair();
            match side {
                Side::Left if x == elem => return Ok(y),
                Side::Right if y == elem => return Ok(x),
                _ => {}
            }
        }
        match side {
            // Case 3: fresh left element, least unused element of the big class.
            Side::Left => self
                .right_class
                .iter()
                .copied()
                .find(|&y| history.iter().all(|e| e.pair().1 != y))
                .ok_or(GameError::StrategyMiss),
            // Case 4: fresh right element, least unused left singleton.
            Side::Right => self
                .left_singletons
                .iter()
                .copied()
                .find(|&x| history.iter().all(|e| e.pair().0 != x))
                .ok_or(GameError::StrategyMiss),
        }
    }
}

// ---------------------------------------------------------------------------
// The greedy condensation builder
// ---------------------------------------------------------------------------

/// A certified prefix of a condensation between two lazily explored
/// equivalence structures.
#[derive(Debug, Clone)]
pub struct CondensationPrefix {
    pub pairs: Vec<(usize, usize)>,
    pub left_prefix: FiniteStructure,
    pub right_prefix: FiniteStructure,
    /// Which greedy branch produced the prefix.
    pub via_infinite_class: bool,
}

/// Build `budget` pairs of a condensation prefix between two full class
/// members. When the right structure has an infinite class, the union of
/// the left structure's non-singleton classes goes into it and the left
/// singletons onto the rest; otherwise the greedy recursion selects, for
/// each left class in turn, a strictly larger fresh right class.
///
/// The refusal mirrors the one genuine obstruction: an infinite left class
/// cannot inject into a structure all of whose classes are finite.
pub fn claim_condensation_builder(
    left_spec: &ClassCSpec,
    right_spec: &ClassCSpec,
    budget: usize,
) -> Result<CondensationPrefix, MenagerieError> {
    left_spec.is_class_c_member()?;
    right_spec.is_class_c_member()?;
    if left_spec.has_infinite_class() && !right_spec.has_infinite_class() {
        return Err(MenagerieError::Obstruction(
            "the left structure has an infinite class and every right class is finite; \
             a bijective homomorphism would inject it into one of them"
                .to_string(),
        ));
    }
    let via_infinite_class = right_spec.has_infinite_class();
    let mut right_level = budget.max(4);
    let mut right = class_assignment(right_spec, Level::At(right_level))?;
    let left = class_assignment(left_spec, Level::At(budget))?;
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(budget);
    let mut used_right: Vec<bool> = vec![false; right.class_of.len()];
    // Greedy state for the all-finite branch.
    let mut selected: Vec<(usize, usize)> = Vec::new(); // (left class id, right class id)
    let mut selected_max = 0usize;
    let grow = |right: &mut ClassAssignment,
                    used: &mut Vec<bool>,
                    level: &mut usize|
     -> Result<(), MenagerieError> {
        *level += 8;
        *right = class_assignment(right_spec, Level::At(*level))?;
        used.resize(right.class_of.len(), false);
        Ok(())
    };
    for x in 0..budget {
        let class_id = left.class_of[x];
        let kind = left.classes[class_id].kind;
        let y = if kind == ClassKind::Singleton {
            // Singletons of the left structure go to fresh right singletons.
            loop {
                let found = right
                    .classes
                    .iter()
                    .filter(|c| c.kind == ClassKind::Singleton)
                    .map(|c| c.members[0])
                    .find(|&y| !used_right[y]);
                match found {
                    Some(y) => break y,
                    None => grow(&mut right, &mut used_right, &mut right_level)?,
                }
            }
        } else if via_infinite_class {
            // Non-singleton elements pour into the first infinite class.
            loop {
                let found = right
                    .classes
                    .iter()
                    .find(|c| c.kind == ClassKind::Infinite)
                    .and_then(|c| c.members.iter().copied().find(|&y| !used_right[y]));
                match found {
                    Some(y) => break y,
                    None => grow(&mut right, &mut used_right, &mut right_level)?,
                }
            }
        } else {
            // Greedy branch: this left class's dedicated right class.
            let left_size = match kind {
                ClassKind::Finite { target } => target,
                ClassKind::Singleton | ClassKind::Infinite => unreachable!("handled above"),
            };
            let target_class = match selected.iter().find(|&&(l, _)| l == class_id) {
                Some(&(_, r)) => r,
                None => {
                    // Least fresh right class strictly larger than this left
                    // class and everything selected before it.
                    let needed = left_size.max(selected_max) + 1;
                    let rc = loop {
                        let found = (0..right.classes.len()).find(|&rc| {
                            matches!(right.classes[rc].kind,
                                ClassKind::Finite { target } if target >= needed)
                                && !selected.iter().any(|&(_, r)| r == rc)
                        });
                        match found {
                            Some(rc) => break rc,
                            None => grow(&mut right, &mut used_right, &mut right_level)?,
                        }
                    };
                    let rc_size = match right.classes[rc].kind {
                        ClassKind::Finite { target } => target,
                        _ => unreachable!("selected a finite class"),
                    };
                    selected_max = selected_max.max(rc_size);
                    selected.push((class_id, rc));
                    rc
                }
            };
            // The k-th member of the left class maps to the k-th member of
            // its target class; materialize the target as far as needed.
            let k = left.classes[class_id]
                .members
                .iter()
                .position(|&m| m == x)
                .expect("x belongs to its own class");
            loop {
                if let Some(&y) = right.classes[target_class].members.get(k) {
                    break y;
                }
                grow(&mut right, &mut used_right, &mut right_level)?;
            }
        };
        used_right[y] = true;
        pairs.push((x, y));
    }
    let left_prefix = build_class_c(left_spec, Level::At(budget))?;
    let right_prefix = build_class_c(right_spec, Level::At(right.class_of.len()))?;
    let pair = StructurePair::new(&left_prefix, &right_prefix)?;
    match check_partial(pair, &pairs).map_err(|e| MenagerieError::InvalidSpec(e.to_string()))? {
        CheckOutcome::Accepted(_) => {}
        CheckOutcome::Violation(v) => {
            return Err(MenagerieError::InvalidSpec(format!(
                "builder emitted a non-condensation prefix: {v}"
            )))
        }
    }
    Ok(CondensationPrefix {
        pairs,
        left_prefix,
        right_prefix,
        via_infinite_class,
    })
}

// ---------------------------------------------------------------------------
// The truncated separating pair
// ---------------------------------------------------------------------------

/// Truncations of the separating pair: the left structure has singletons
/// and one class of every size 2..k-1, the right structure the same number
/// of singletons and a single large class standing in for an infinite one,
/// with both universes equal. `phi` says some class has at least k elements
/// (k existentials); `psi` says some class has exactly two.
#[derive(Debug, Clone)]
pub struct ExampleIWitnesses {
    pub left: FiniteStructure,
    pub right: FiniteStructure,
    pub phi: Formula,
    pub psi: Formula,
}

/// A class with at least `k` members: k pairwise distinct, pairwise related
/// elements.
pub fn class_of_size_at_least(k: usize) -> Formula {
    let mut parts = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            parts.push(Formula::Neq(i, j));
            parts.push(Formula::Rel("R".to_string(), vec![i, j]));
        }
    }
    let mut f = Formula::and(parts);
    for v in (0..k).rev() {
        f = Formula::exists(v, f);
    }
    f
}

/// A class of size exactly two: two distinct related elements such that
/// everything else is unrelated to the first.
pub fn class_of_size_exactly_two() -> Formula {
    let (u, v, w) = (0, 1, 2);
    Formula::exists(
        u,
        Formula::exists(
            v,
            Formula::and(vec![
                Formula::Neq(u, v),
                Formula::Rel("R".to_string(), vec![u, v]),
                Formula::forall(
                    w,
                    Formula::or(vec![
                        Formula::Eq(w, u),
                        Formula::Eq(w, v),
                        Formula::NegRel("R".to_string(), vec![w, u]),
                    ]),
                ),
            ]),
        ),
    )
}

pub fn example_i_witnesses(k: usize) -> Result<ExampleIWitnesses, MenagerieError> {
    if k < 4 {
        return Err(MenagerieError::InvalidSpec(
            "truncation level must be at least 4".to_string(),
        ));
    }
    let sizes: Vec<usize> = (2..k).collect();
    let big: usize = sizes.iter().sum();
    let left_spec = ClassCSpec {
        singletons: SingletonBudget::Finite(k),
        finite_class_sizes: ClassSizes::Explicit(sizes),
        infinite_classes: 0,
    };
    let right_spec = ClassCSpec {
        singletons: SingletonBudget::Finite(k),
        finite_class_sizes: ClassSizes::Explicit(vec![big]),
        infinite_classes: 0,
    };
    let left = build_class_c(&left_spec, Level::Full)?;
    let right = build_class_c(&right_spec, Level::Full)?;
    debug_assert_eq!(left.universe_size(), right.universe_size());
    Ok(ExampleIWitnesses {
        left,
        right,
        phi: class_of_size_at_least(k),
        psi: class_of_size_exactly_two(),
    })
}

// ---------------------------------------------------------------------------
// The random poset
// ---------------------------------------------------------------------------

/// A lazily generated strict partial order serving the two extension
/// properties on demand: between any finite sets L < G a fresh point, and
/// around any finite set K fresh points below, above and incomparable to it.
/// Deterministic in the seed; the explored prefix stays irreflexive and
/// transitive after every extension.
pub struct RandomPosetOracle {
    lt: Vec<Vec<bool>>,
    rng: ChaCha8Rng,
    prefix: FiniteStructure,
}

pub const POSET_RELATION: &str = "lt";

impl RandomPosetOracle {
    pub fn new(seed: u64) -> RandomPosetOracle {
        let mut oracle = RandomPosetOracle {
            lt: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            prefix: FiniteStructure::empty(Signature::binary(POSET_RELATION), 0),
        };
        oracle.rebuild_prefix();
        oracle
    }

    pub fn len(&self) -> usize {
        self.lt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lt.is_empty()
    }

    pub fn lt(&self, a: usize, b: usize) -> bool {
        self.lt[a][b]
    }

    pub fn incomparable(&self, a: usize, b: usize) -> bool {
        a != b && !self.lt[a][b] && !self.lt[b][a]
    }

    pub fn structure(&self) -> &FiniteStructure {
        &self.prefix
    }

    fn rebuild_prefix(&mut self) {
        let n = self.lt.len();
        let mut s = FiniteStructure::empty(Signature::binary(POSET_RELATION), n);
        for a in 0..n {
            for b in 0..n {
                if self.lt[a][b] {
                    s.insert_tuple(0, vec![a, b]).expect("in range");
                }
            }
        }
        self.prefix = s;
    }

    fn check_range(&self, set: &[usize]) -> Result<(), MenagerieError> {
        if set.is_empty() {
            return Err(MenagerieError::RequestRejected {
                reason: "empty constraint set".to_string(),
                pair: None,
            });
        }
        if let Some(&e) = set.iter().find(|&&e| e >= self.len()) {
            return Err(MenagerieError::RequestRejected {
                reason: format!("element {e} outside the prefix of size {}", self.len()),
                pair: None,
            });
        }
        Ok(())
    }

    /// Append a fresh element whose strict lower cone is `below` and upper
    /// cone is `above` (both already downward/upward closed).
    fn push_element(&mut self, below: &[bool], above: &[bool]) -> usize {
        let n = self.len();
        for row in self.lt.iter_mut() {
            row.push(false);
        }
        self.lt.push(vec![false; n + 1]);
        for a in 0..n {
            if below[a] {
                self.lt[a][n] = true;
            }
            if above[a] {
                self.lt[n][a] = true;
            }
        }
        self.rebuild_prefix();
        self.verify_strict_order()
            .expect("cone insertion preserves strictness and transitivity");
        n
    }

    fn down_closure(&self, set: &[usize]) -> Vec<bool> {
        let mut out = vec![false; self.len()];
        for &g in set {
            out[g] = true;
            for a in 0..self.len() {
                if self.lt[a][g] {
                    out[a] = true;
                }
            }
        }
        out
    }

    fn up_closure(&self, set: &[usize]) -> Vec<bool> {
        let mut out = vec![false; self.len()];
        for &g in set {
            out[g] = true;
            for a in 0..self.len() {
                if self.lt[g][a] {
                    out[a] = true;
                }
            }
        }
        out
    }

    /// A fresh element incomparable to everything.
    pub fn add_isolated(&mut self) -> usize {
        let n = self.len();
        self.push_element(&vec![false; n], &vec![false; n])
    }

    /// First extension property: a fresh x with L < x < G. Rejected, naming
    /// a violating pair, when L < G fails in the prefix.
    pub fn request_between(
        &mut self,
        lows: &[usize],
        highs: &[usize],
    ) -> Result<usize, MenagerieError> {
        self.check_range(lows)?;
        self.check_range(highs)?;
        for &l in lows {
            for &g in highs {
                if !self.lt[l][g] {
                    return Err(MenagerieError::RequestRejected {
                        reason: "constraint sets do not satisfy L < G".to_string(),
                        pair: Some((l, g)),
                    });
                }
            }
        }
        let below = self.down_closure(lows);
        let above = self.up_closure(highs);
        Ok(self.push_element(&below, &above))
    }

    /// Second extension property, lower point: a fresh x with x < K.
    pub fn request_below(&mut self, k: &[usize]) -> Result<usize, MenagerieError> {
        self.check_range(k)?;
        let above = self.up_closure(k);
        let below = vec![false; self.len()];
        Ok(self.push_element(&below, &above))
    }

    /// Second extension property, upper point: a fresh y with y > K.
    pub fn request_above(&mut self, k: &[usize]) -> Result<usize, MenagerieError> {
        self.check_range(k)?;
        let below = self.down_closure(k);
        let above = vec![false; self.len()];
        Ok(self.push_element(&below, &above))
    }

    /// Second extension property, side point: a fresh z incomparable to K
    /// (realized incomparable to the whole prefix).
    pub fn request_incomparable(&mut self, k: &[usize]) -> Result<usize, MenagerieError> {
        self.check_range(k)?;
        Ok(self.add_isolated())
    }

    /// The full second extension property: points below, above and beside K.
    pub fn request_u2(&mut self, k: &[usize]) -> Result<(usize, usize, usize), MenagerieError> {
        let below = self.request_below(k)?;
        let above = self.request_above(k)?;
        let beside = self.request_incomparable(k)?;
        Ok((below, above, beside))
    }

    /// Random consistent growth for plain exploration. Each new element
    /// draws a placement mode (above some old elements, below some, between
    /// two cones, or isolated) and then a random cone of that shape; the
    /// upper cone is drawn from the elements already above every chosen
    /// lower element, so transitivity is preserved by construction.
    pub fn grow(&mut self, upto: usize) {
        while self.len() < upto {
            let n = self.len();
            let mode = self.rng.gen_range(0..4u8);
            let mut lows = Vec::new();
            let mut highs = Vec::new();
            match mode {
                0 => {
                    for a in 0..n {
                        if self.rng.gen_bool(0.35) {
                            lows.push(a);
                        }
                    }
                }
                1 => {
                    for u in 0..n {
                        if self.rng.gen_bool(0.35) {
                            highs.push(u);
                        }
                    }
                }
                2 if n > 0 => {
                    // Sandwich the new element into an existing comparable
                    // pair when one is available.
                    let l = self.rng.gen_range(0..n);
                    lows.push(l);
                    let ups: Vec<usize> = (0..n).filter(|&u| self.lt[l][u]).collect();
                    if !ups.is_empty() {
                        highs.push(ups[self.rng.gen_range(0..ups.len())]);
                    }
                }
                _ => {}
            }
            let below = self.down_closure(&lows);
            let above = if highs.is_empty() {
                vec![false; n]
            } else {
                self.up_closure(&highs)
            };
            self.push_element(&below, &above);
        }
    }

    /// Irreflexivity and transitivity of the explored prefix.
    pub fn verify_strict_order(&self) -> Result<(), MenagerieError> {
        let n = self.len();
        for a in 0..n {
            if self.lt[a][a] {
                return Err(MenagerieError::RequestRejected {
                    reason: format!("reflexive point {a}"),
                    pair: Some((a, a)),
                });
            }
            for b in 0..n {
                if self.lt[a][b] && self.lt[b][a] {
                    return Err(MenagerieError::RequestRejected {
                        reason: "antisymmetry violated".to_string(),
                        pair: Some((a, b)),
                    });
                }
                if !self.lt[a][b] {
                    continue;
                }
                for c in 0..n {
                    if self.lt[b][c] && !self.lt[a][c] {
                        return Err(MenagerieError::RequestRejected {
                            reason: format!("transitivity broken through {b}"),
                            pair: Some((a, c)),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Seed the prefix with a small random poset plus the canonical bad
    /// pair of the non-reversibility proof: elements a0, a1 incomparable
    /// and b0 < b1, with the map {a0 -> b0, a1 -> b1} and the certificate
    /// that the non-pair (a0, a1) lands on the pair (b0, b1).
    pub fn bootstrap_bad_pair(&mut self) -> BadCondensation {
        self.grow(self.len().max(10));
        let b0 = self.add_isolated();
        let b1 = self.request_above(&[b0]).expect("b0 is in range");
        let a0 = self.add_isolated();
        let a1 = self.add_isolated();
        let mut pairs = vec![(a0, b0), (a1, b1)];
        pairs.sort_unstable();
        BadCondensation {
            map: check_partial(
                StructurePair::new(&self.prefix, &self.prefix).expect("self pair"),
                &pairs,
            )
            .expect("elements in range")
            .accepted()
            .expect("incomparable sources impose no forward constraints"),
            relation: POSET_RELATION.to_string(),
            tuple: vec![a0, a1],
            image: vec![b0, b1],
        }
    }

    /// Hand the oracle over as a plain lazily explorable structure.
    pub fn into_lazy(self) -> LazyStructure {
        let prefix = self.prefix.clone();
        LazyStructure::new(prefix, Box::new(PosetExtender { oracle: self }))
    }
}

struct PosetExtender {
    oracle: RandomPosetOracle,
}

impl Extender for PosetExtender {
    fn extend(
        &mut self,
        _current: &FiniteStructure,
        upto: usize,
    ) -> Result<FiniteStructure, StructureError> {
        self.oracle.grow(upto);
        Ok(self.oracle.structure().clone())
    }

    fn verify(&self, _prefix: &FiniteStructure) -> Result<(), StructureError> {
        self.oracle
            .verify_strict_order()
            .map_err(|e| StructureError::ExtenderFailure {
                family: "random-poset".to_string(),
                reason: e.to_string(),
            })
    }

    fn family(&self) -> &str {
        "random-poset"
    }
}

impl SelfExtensionOracle for RandomPosetOracle {
    fn prefix(&self) -> &FiniteStructure {
        &self.prefix
    }

    fn cover_left(
        &mut self,
        f: &PartialCondensation,
        x: usize,
    ) -> Result<(usize, ExtensionCase), BfsError> {
        let lower_images: Vec<usize> = f
            .pairs()
            .iter()
            .filter(|&&(d, _)| self.lt(d, x))
            .map(|&(_, i)| i)
            .collect();
        let upper_images: Vec<usize> = f
            .pairs()
            .iter()
            .filter(|&&(d, _)| self.lt(x, d))
            .map(|&(_, i)| i)
            .collect();
        let run = |r: Result<usize, MenagerieError>| r.map_err(|e| BfsError::Oracle(e.to_string()));
        match (lower_images.is_empty(), upper_images.is_empty()) {
            (false, false) => Ok((
                run(self.request_between(&lower_images, &upper_images))?,
                ExtensionCase::Between,
            )),
            (true, false) => Ok((
                run(self.request_below(&upper_images))?,
                ExtensionCase::BelowOnly,
            )),
            (false, true) => Ok((
                run(self.request_above(&lower_images))?,
                ExtensionCase::AboveOnly,
            )),
            (true, true) => {
                let range: Vec<usize> = f.range().collect();
                let fresh = if range.is_empty() {
                    self.add_isolated()
                } else {
                    run(self.request_incomparable(&range))?
                };
                Ok((fresh, ExtensionCase::Incomparable))
            }
        }
    }

    fn cover_right(
        &mut self,
        f: &PartialCondensation,
        _y: usize,
    ) -> Result<(usize, ExtensionCase), BfsError> {
        let domain: Vec<usize> = f.domain().collect();
        let fresh = if domain.is_empty() {
            self.add_isolated()
        } else {
            self.request_incomparable(&domain)
                .map_err(|e| BfsError::Oracle(e.to_string()))?
        };
        Ok((fresh, ExtensionCase::Incomparable))
    }

    fn family(&self) -> &str {
        "random-poset"
    }
}
