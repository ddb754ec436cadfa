//! Back-and-forth systems of partial condensations: verification of the two
//! extension clauses, the greatest-fixed-point system of a finite pair, the
//! constructive extension of a member to a full condensation, and the
//! bad-condensation route to non-reversibility evidence on lazily presented
//! structures.

#![allow(clippy::needless_range_loop)] // index loops double as element ids

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::condensation::{
    assignment_of, check_partial, CheckOutcome, CondensationWitness, Direction, PairCtx, PcSet,
    PartialCondensation, PcViolation, UNMAPPED,
};
use crate::games::Side;
use crate::structure::{FiniteStructure, StructurePair};

#[derive(Debug, Error)]
pub enum BfsError {
    #[error("candidate member {member:?} fails the partial condensation check: {violation}")]
    MemberNotPartial {
        member: Vec<(usize, usize)>,
        violation: PcViolation,
    },
    #[error("seed map is not a member of the system")]
    SeedNotMember,
    #[error("extension failure: no member covers {clause:?} element {element}")]
    ExtensionFailure { clause: Side, element: usize },
    #[error("finite structures are reversible; no bad condensation extends")]
    FiniteStructureReversible,
    #[error("bad condensation certificate invalid: {0}")]
    BadCertificate(String),
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error(transparent)]
    Condensation(#[from] crate::condensation::CondensationError),
}

// ---------------------------------------------------------------------------
// Finite systems
// ---------------------------------------------------------------------------

/// A finite back-and-forth system: a non-empty set of partial condensations
/// in which every member extends, within the system, to cover any given left
/// or right element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfsSystem {
    members: BTreeSet<PartialCondensation>,
}

impl BfsSystem {
    pub fn members(&self) -> &BTreeSet<PartialCondensation> {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, f: &PartialCondensation) -> bool {
        self.members.contains(f)
    }

    pub fn is_closed_under_restrictions(&self) -> bool {
        self.members.iter().all(|f| {
            (0..f.len()).all(|drop| {
                let pairs: Vec<(usize, usize)> = f
                    .pairs()
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != drop)
                    .map(|(_, &p)| p)
                    .collect();
                self.members
                    .contains(&restriction_from_sorted(pairs))
            })
        })
    }
}

fn restriction_from_sorted(pairs: Vec<(usize, usize)>) -> PartialCondensation {
    // pairs inherit sortedness from the parent member
    PartialCondensation::from_sorted(pairs)
}

#[derive(Debug, Clone)]
pub enum BfsVerdict {
    Valid(BfsSystem),
    Empty,
    Counterexample {
        member: PartialCondensation,
        element: usize,
        clause: Side,
    },
}

impl BfsVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, BfsVerdict::Valid(_))
    }
}

/// Check the two extension clauses exhaustively for a candidate member set.
/// Members must individually pass the partial condensation check; the
/// counterexample names the member, the uncoverable element and the clause.
pub fn verify_bfs(
    pair: StructurePair<'_>,
    members: &[PartialCondensation],
) -> Result<BfsVerdict, BfsError> {
    for m in members {
        match check_partial(pair, m.pairs())? {
            CheckOutcome::Accepted(_) => {}
            CheckOutcome::Violation(v) => {
                return Err(BfsError::MemberNotPartial {
                    member: m.pairs().to_vec(),
                    violation: v,
                })
            }
        }
    }
    if members.is_empty() {
        return Ok(BfsVerdict::Empty);
    }
    let set: BTreeSet<PartialCondensation> = members.iter().cloned().collect();
    let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
    for f in &set {
        for x in 0..ln {
            if f.image(x).is_none()
                && !set
                    .iter()
                    .any(|g| g.image(x).is_some() && f.is_restriction_of(g))
            {
                return Ok(BfsVerdict::Counterexample {
                    member: f.clone(),
                    element: x,
                    clause: Side::Left,
                });
            }
        }
        for y in 0..rn {
            if f.preimage(y).is_none()
                && !set
                    .iter()
                    .any(|g| g.preimage(y).is_some() && f.is_restriction_of(g))
            {
                return Ok(BfsVerdict::Counterexample {
                    member: f.clone(),
                    element: y,
                    clause: Side::Right,
                });
            }
        }
    }
    Ok(BfsVerdict::Valid(BfsSystem { members: set }))
}

/// The greatest fixed point: start from all partial condensations of the
/// pair and repeatedly delete members that cannot answer some one-element
/// challenge inside the survivor set, until stable.
///
/// Every iterate is closed under restrictions (deleting an unsupported
/// member never orphans a smaller one), so one-step extension probes decide
/// the general extension clauses and the result is the inclusion-largest
/// back-and-forth system when non-empty.
pub fn maximal_bfs(pair: StructurePair<'_>) -> Option<BfsSystem> {
    let ctx = PairCtx::new(pair);
    let (ln, rn) = (ctx.left_size(), ctx.right_size());
    let mut survivors: Vec<PartialCondensation> =
        crate::condensation::all_partial_condensations(pair);
    loop {
        let survivor_set = PcSet::from_members(&survivors, ln, rn);
        let kept: Vec<PartialCondensation> = survivors
            .iter()
            .filter(|f| one_step_supported(&ctx, f, &survivor_set, ln, rn))
            .cloned()
            .collect();
        if kept.len() == survivors.len() {
            break;
        }
        survivors = kept;
    }
    if survivors.is_empty() {
        None
    } else {
        Some(BfsSystem {
            members: survivors.into_iter().collect(),
        })
    }
}

fn one_step_supported(
    ctx: &PairCtx<'_>,
    f: &PartialCondensation,
    members: &PcSet,
    ln: usize,
    rn: usize,
) -> bool {
    let assign = assignment_of(f, ln);
    let mut used = vec![false; rn];
    for &(_, y) in f.pairs() {
        used[y] = true;
    }
    for x in 0..ln {
        if assign[x] != UNMAPPED {
            continue;
        }
        let ok = (0..rn).any(|y| {
            !used[y] && ctx.extend_ok(&assign, x, y) && members.contains_one_step(f, x, y)
        });
        if !ok {
            return false;
        }
    }
    for y in 0..rn {
        if used[y] {
            continue;
        }
        let ok = (0..ln).any(|x| {
            assign[x] == UNMAPPED
                && ctx.extend_ok(&assign, x, y)
                && members.contains_one_step(f, x, y)
        });
        if !ok {
            return false;
        }
    }
    true
}

/// The constructive route from a system member to a full condensation:
/// alternately cover the least uncovered left element through the first
/// clause and the least uncovered right element through the second, always
/// moving to a witnessing member of the system. Returns the witness together
/// with the nested chain of intermediate maps.
pub fn extend_to_condensation(
    pair: StructurePair<'_>,
    system: &BfsSystem,
    seed: &PartialCondensation,
) -> Result<(CondensationWitness, Vec<PartialCondensation>), BfsError> {
    if !system.contains(seed) {
        return Err(BfsError::SeedNotMember);
    }
    let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
    let mut f = seed.clone();
    let mut chain = vec![f.clone()];
    for _ in 0..=ln + rn {
        let uncovered_left = (0..ln).find(|&x| f.image(x).is_none());
        let uncovered_right = (0..rn).find(|&y| f.preimage(y).is_none());
        let (target, clause) = match (uncovered_left, uncovered_right) {
            (Some(x), _) => (x, Side::Left),
            (None, Some(y)) => (y, Side::Right),
            (None, None) => {
                let map: Vec<usize> = (0..ln)
                    .map(|x| f.image(x).expect("domain is total"))
                    .collect();
                return Ok((
                    CondensationWitness {
                        map,
                        direction: Direction::LeftToRight,
                    },
                    chain,
                ));
            }
        };
        let g = system
            .members()
            .iter()
            .find(|g| match clause {
                Side::Left => g.image(target).is_some() && f.is_restriction_of(g),
                Side::Right => g.preimage(target).is_some() && f.is_restriction_of(g),
            })
            .ok_or(BfsError::ExtensionFailure {
                clause,
                element: target,
            })?;
        // Each step is re-certified; a violation here means the system lied.
        match check_partial(pair, g.pairs())? {
            CheckOutcome::Accepted(pc) => {
                f = pc;
                chain.push(f.clone());
            }
            CheckOutcome::Violation(v) => {
                return Err(BfsError::MemberNotPartial {
                    member: g.pairs().to_vec(),
                    violation: v,
                })
            }
        }
    }
    Err(BfsError::ExtensionFailure {
        clause: Side::Left,
        element: ln,
    })
}

// ---------------------------------------------------------------------------
// Lazily presented self-pairs and non-reversibility
// ---------------------------------------------------------------------------

/// A finite partial self-condensation together with the certificate that no
/// automorphism extends it: a tuple outside the relation whose image lies
/// inside it.
#[derive(Debug, Clone, Serialize)]
pub struct BadCondensation {
    pub map: PartialCondensation,
    pub relation: String,
    pub tuple: Vec<usize>,
    pub image: Vec<usize>,
}

impl BadCondensation {
    /// Re-check the certificate against the current prefix: the tuple lies
    /// in the domain, is not in the relation, and its image is.
    pub fn validate(&self, s: &FiniteStructure) -> Result<(), BfsError> {
        let rel = s
            .sig()
            .index_of(&self.relation)
            .ok_or_else(|| BfsError::BadCertificate(format!("unknown relation {}", self.relation)))?;
        let image: Option<Vec<usize>> = self.tuple.iter().map(|&e| self.map.image(e)).collect();
        if image.as_deref() != Some(&self.image[..]) {
            return Err(BfsError::BadCertificate(
                "certificate tuple is not mapped onto the stated image".to_string(),
            ));
        }
        if s.has_tuple(rel, &self.tuple) {
            return Err(BfsError::BadCertificate(format!(
                "tuple {:?} lies in {}",
                self.tuple, self.relation
            )));
        }
        if !s.has_tuple(rel, &self.image) {
            return Err(BfsError::BadCertificate(format!(
                "image {:?} does not lie in {}",
                self.image, self.relation
            )));
        }
        Ok(())
    }
}

/// Which of the four extension situations a step realized: both sides of
/// the covered element constrained, only elements above it, only elements
/// below it, or no comparable elements at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ExtensionCase {
    Between,
    BelowOnly,
    AboveOnly,
    Incomparable,
}

impl ExtensionCase {
    pub fn index(self) -> usize {
        match self {
            ExtensionCase::Between => 1,
            ExtensionCase::BelowOnly => 2,
            ExtensionCase::AboveOnly => 3,
            ExtensionCase::Incomparable => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepDirection {
    Forth,
    Back,
}

/// One extension step of the alternating construction.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub direction: StepDirection,
    /// The previously uncovered element this step covers.
    pub covered: usize,
    /// The fresh element chosen as its partner.
    pub witness: usize,
    pub case: ExtensionCase,
}

/// A lazily presented structure playing both sides of a self-pair, together
/// with the extension procedure realizing the two clauses of its implicit
/// back-and-forth system (all finite partial condensations extending the
/// seed). Extension requests may enlarge the explored prefix.
pub trait SelfExtensionOracle {
    fn prefix(&self) -> &FiniteStructure;

    /// First clause: a partner for the uncovered left element `x`, fresh in
    /// the range of `f`.
    fn cover_left(
        &mut self,
        f: &PartialCondensation,
        x: usize,
    ) -> Result<(usize, ExtensionCase), BfsError>;

    /// Second clause: a partner for the uncovered right element `y`, fresh
    /// in the domain of `f`.
    fn cover_right(
        &mut self,
        f: &PartialCondensation,
        y: usize,
    ) -> Result<(usize, ExtensionCase), BfsError>;

    fn family(&self) -> &str;
}

/// A finite structure or a lazily presented one, as the subject of a
/// reversibility question.
pub enum SelfStructure<'a> {
    Finite(&'a FiniteStructure),
    Lazy(&'a mut dyn SelfExtensionOracle),
}

#[derive(Debug, Clone, Serialize)]
pub struct NonReversibilityEvidence {
    pub family: String,
    pub bad: BadCondensation,
    pub steps: Vec<StepRecord>,
    pub final_map: PartialCondensation,
    pub explored_elements: usize,
}

impl NonReversibilityEvidence {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("evidence serializes")
    }
}

/// Run `budget` alternating extension steps from a bad condensation. Every
/// step is certified as a partial condensation on the prefix explored so
/// far, and the bad certificate is re-validated after each step, so no
/// extension of the growing map restricts an automorphism.
///
/// Finite structures are rejected: each of their self-condensations is an
/// automorphism, so no bad condensation exists to start from.
pub fn reversibility_witness(
    s: SelfStructure<'_>,
    bad: &BadCondensation,
    budget: usize,
) -> Result<NonReversibilityEvidence, BfsError> {
    let oracle = match s {
        SelfStructure::Finite(_) => return Err(BfsError::FiniteStructureReversible),
        SelfStructure::Lazy(oracle) => oracle,
    };
    bad.validate(oracle.prefix())?;
    let mut f = bad.map.clone();
    let mut steps = Vec::with_capacity(budget);
    let mut forth_turn = true;
    for _ in 0..budget {
        let n = oracle.prefix().universe_size();
        let target_left = (0..n).find(|&x| f.image(x).is_none());
        let target_right = (0..n).find(|&y| f.preimage(y).is_none());
        // Alternate, falling through when one side is already exhausted.
        let (direction, covered) = match (forth_turn, target_left, target_right) {
            (true, Some(x), _) => (StepDirection::Forth, x),
            (true, None, Some(y)) => (StepDirection::Back, y),
            (false, _, Some(y)) => (StepDirection::Back, y),
            (false, Some(x), None) => (StepDirection::Forth, x),
            (_, None, None) => {
                return Err(BfsError::Oracle(
                    "prefix exhausted without fresh witnesses".to_string(),
                ))
            }
        };
        forth_turn = !forth_turn;
        let (witness, case) = match direction {
            StepDirection::Forth => oracle.cover_left(&f, covered)?,
            StepDirection::Back => oracle.cover_right(&f, covered)?,
        };
        let (x, y) = match direction {
            StepDirection::Forth => (covered, witness),
            StepDirection::Back => (witness, covered),
        };
        f = f
            .extended(x, y)
            .ok_or_else(|| BfsError::Oracle("oracle witness was not fresh".to_string()))?;
        let prefix = oracle.prefix();
        let pair = StructurePair::new(prefix, prefix)
            .expect("self pair shares its signature");
        match check_partial(pair, f.pairs())? {
            CheckOutcome::Accepted(pc) => f = pc,
            CheckOutcome::Violation(v) => {
                return Err(BfsError::MemberNotPartial {
                    member: f.pairs().to_vec(),
                    violation: v,
                })
            }
        }
        bad.validate(oracle.prefix())?;
        steps.push(StepRecord {
            direction,
            covered,
            witness,
            case,
        });
    }
    Ok(NonReversibilityEvidence {
        family: oracle.family().to_string(),
        bad: bad.clone(),
        steps,
        final_map: f,
        explored_elements: oracle.prefix().universe_size(),
    })
}
