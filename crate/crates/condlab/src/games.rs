//! Condensation games: the n-round game solver with strategy extraction for
//! either player, full-length games, the round-system sequence with its
//! level-to-level extension conditions, transcript replay, and an
//! interactive driver.
//!
//! In each round player I picks an element of either structure and player II
//! answers in the other; II wins a play when the produced pair set is a
//! partial condensation. Violations are monotone (a broken pair set stays
//! broken under extension), so the solver prunes a position the moment its
//! pair set leaves PC. Player I never benefits from re-choosing an already
//! played element (survival sets shrink with the round count), so the search
//! only branches on fresh moves; II's replies to replayed elements are fixed
//! by functionality.

#![allow(clippy::needless_range_loop)] // index loops double as element ids

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::condensation::{
    all_partial_condensations, assignment_of, check_partial, CheckOutcome, PairCtx, PcSet,
    PartialCondensation, PcViolation, UNMAPPED,
};
use crate::structure::StructurePair;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("move {elem} out of range on side {side:?} (universe {universe})")]
    IllegalMove {
        side: Side,
        elem: usize,
        universe: usize,
    },
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("strategy has no recorded response for this position")]
    StrategyMiss,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Player {
    I,
    II,
}

/// One round of a play: player I chose `mv` in the structure named by
/// `side`, player II answered `resp` in the other structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub side: Side,
    #[serde(rename = "move")]
    pub mv: usize,
    pub resp: usize,
}

impl TranscriptEntry {
    /// The pair this round contributed, oriented left-to-right.
    pub fn pair(&self) -> (usize, usize) {
        match self.side {
            Side::Left => (self.mv, self.resp),
            Side::Right => (self.resp, self.mv),
        }
    }
}

/// A response source for player II.
pub trait Responder {
    fn respond(
        &self,
        pair: StructurePair<'_>,
        history: &[TranscriptEntry],
        side: Side,
        elem: usize,
    ) -> Result<usize, GameError>;
}

// ---------------------------------------------------------------------------
// Position keys
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum PosKey {
    /// Assignment packed four bits per left element (image + 1, 0 = unmapped).
    Packed(u64, u32),
    Wide(Box<[u32]>, u32),
}

fn pos_key(assign: &[u32], rounds: u32) -> PosKey {
    if assign.len() <= 16 && assign.iter().all(|&y| y == UNMAPPED || y < 15) {
        let mut code = 0u64;
        for (x, &y) in assign.iter().enumerate() {
            if y != UNMAPPED {
                code |= u64::from(y + 1) << (4 * x);
            }
        }
        PosKey::Packed(code, rounds)
    } else {
        PosKey::Wide(assign.into(), rounds)
    }
}

struct Solver<'a> {
    ctx: PairCtx<'a>,
    memo: HashMap<PosKey, bool>,
}

impl<'a> Solver<'a> {
    fn new(pair: StructurePair<'a>) -> Solver<'a> {
        Solver {
            ctx: PairCtx::new(pair),
            memo: HashMap::new(),
        }
    }

    /// Does II survive `rounds` more rounds from this partial condensation?
    fn ii_wins(&mut self, assign: &mut Vec<u32>, used: &mut Vec<bool>, rounds: u32) -> bool {
        if rounds == 0 {
            return true;
        }
        let key = pos_key(assign, rounds);
        if let Some(&hit) = self.memo.get(&key) {
            return hit;
        }
        let result = self.all_fresh_moves_answerable(assign, used, rounds);
        self.memo.insert(key, result);
        result
    }

    fn all_fresh_moves_answerable(
        &mut self,
        assign: &mut Vec<u32>,
        used: &mut Vec<bool>,
        rounds: u32,
    ) -> bool {
        let (ln, rn) = (self.ctx.left_size(), self.ctx.right_size());
        for x in 0..ln {
            if assign[x] != UNMAPPED {
                continue;
            }
            if self.winning_response_left(assign, used, x, rounds).is_none() {
                return false;
            }
        }
        for y in 0..rn {
            if used[y] {
                continue;
            }
            if self
                .winning_response_right(assign, used, y, rounds)
                .is_none()
            {
                return false;
            }
        }
        true
    }

    /// Least y answering I's fresh left move x while keeping II winning.
    fn winning_response_left(
        &mut self,
        assign: &mut Vec<u32>,
        used: &mut Vec<bool>,
        x: usize,
        rounds: u32,
    ) -> Option<usize> {
        for y in 0..self.ctx.right_size() {
            if used[y] || !self.ctx.extend_ok(assign, x, y) {
                continue;
            }
            assign[x] = y as u32;
            used[y] = true;
            let ok = self.ii_wins(assign, used, rounds - 1);
            assign[x] = UNMAPPED;
            used[y] = false;
            if ok {
                return Some(y);
            }
        }
        None
    }

    /// Least x answering I's fresh right move y while keeping II winning.
    fn winning_response_right(
        &mut self,
        assign: &mut Vec<u32>,
        used: &mut Vec<bool>,
        y: usize,
        rounds: u32,
    ) -> Option<usize> {
        for x in 0..self.ctx.left_size() {
            if assign[x] != UNMAPPED || !self.ctx.extend_ok(assign, x, y) {
                continue;
            }
            assign[x] = y as u32;
            used[y] = true;
            let ok = self.ii_wins(assign, used, rounds - 1);
            assign[x] = UNMAPPED;
            used[y] = false;
            if ok {
                return Some(x);
            }
        }
        None
    }
}

/// II-win verdicts of the games of length 0..=up_to from the empty
/// position, sharing one memo table across the round counts.
pub fn game_verdicts(pair: StructurePair<'_>, up_to: usize) -> Vec<bool> {
    let mut solver = Solver::new(pair);
    let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
    let mut assign = vec![UNMAPPED; ln];
    let mut used = vec![false; rn];
    (0..=up_to)
        .map(|n| solver.ii_wins(&mut assign, &mut used, n as u32))
        .collect()
}

/// Does player II survive `rounds` rounds starting from `from`?
pub fn ii_wins_from(pair: StructurePair<'_>, from: &PartialCondensation, rounds: usize) -> bool {
    let mut solver = Solver::new(pair);
    let mut assign = assignment_of(from, pair.left().universe_size());
    let mut used = vec![false; pair.right().universe_size()];
    for &(_, y) in from.pairs() {
        used[y] = true;
    }
    solver.ii_wins(&mut assign, &mut used, rounds as u32)
}

// ---------------------------------------------------------------------------
// Extracted strategies
// ---------------------------------------------------------------------------

/// Player II's winning strategy as a memo table from canonicalized positions
/// (pair set + rounds left + I's move) to the least winning response.
/// Replayed elements are answered by the functionality rule and need no
/// table entries.
/// A canonical position: the sorted pair set plus the rounds left.
type Position = (Vec<(usize, usize)>, u32);

#[derive(Debug, Clone)]
pub struct Strategy {
    rounds: usize,
    table: HashMap<(Position, Side, usize), usize>,
}

impl Strategy {
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }
}

fn pairs_of_history(history: &[TranscriptEntry]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = history.iter().map(|e| e.pair()).collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

impl Responder for Strategy {
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
        let pairs = pairs_of_history(history);
        // Functionality rule for replayed elements.
        for &(x, y) in &pairs {
            match side {
                Side::Left if x == elem => return Ok(y),
                Side::Right if y == elem => return Ok(x),
                _ => {}
            }
        }
        let rounds_left = (self.rounds - history.len()) as u32;
        self.table
            .get(&((pairs, rounds_left), side, elem))
            .copied()
            .ok_or(GameError::StrategyMiss)
    }
}

/// Player I's winning strategy: either a position-indexed move table or a
/// fixed enumeration line (used when a cardinality gap already defeats II).
#[derive(Debug, Clone)]
pub struct SpoilerStrategy {
    rounds: usize,
    plan: SpoilerPlan,
}

#[derive(Debug, Clone)]
enum SpoilerPlan {
    Table(HashMap<Position, (Side, usize)>),
    FixedLine(Vec<(Side, usize)>),
}

impl SpoilerStrategy {
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// I's move for the given play so far.
    pub fn next_move(&self, history: &[TranscriptEntry]) -> Result<(Side, usize), GameError> {
        match &self.plan {
            SpoilerPlan::FixedLine(line) => line
                .get(history.len())
                .copied()
                .ok_or(GameError::StrategyMiss),
            SpoilerPlan::Table(table) => {
                let pairs = pairs_of_history(history);
                let rounds_left = (self.rounds - history.len()) as u32;
                table
                    .get(&(pairs, rounds_left))
                    .copied()
                    .ok_or(GameError::StrategyMiss)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum GameOutcome {
    IiWins(Strategy),
    IWins(SpoilerStrategy),
}

impl GameOutcome {
    pub fn ii_wins(&self) -> bool {
        matches!(self, GameOutcome::IiWins(_))
    }

    pub fn strategy(&self) -> Option<&Strategy> {
        match self {
            GameOutcome::IiWins(s) => Some(s),
            GameOutcome::IWins(_) => None,
        }
    }

    pub fn spoiler(&self) -> Option<&SpoilerStrategy> {
        match self {
            GameOutcome::IWins(s) => Some(s),
            GameOutcome::IiWins(_) => None,
        }
    }
}

/// Solve the n-round condensation game from the empty position, extracting a
/// winning strategy for whichever player has one.
pub fn solve_game(pair: StructurePair<'_>, rounds: usize) -> GameOutcome {
    let mut solver = Solver::new(pair);
    let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
    let mut assign = vec![UNMAPPED; ln];
    let mut used = vec![false; rn];
    if solver.ii_wins(&mut assign, &mut used, rounds as u32) {
        GameOutcome::IiWins(extract_strategy(&mut solver, rounds))
    } else {
        GameOutcome::IWins(extract_spoiler(&mut solver, rounds))
    }
}

/// Walk every position reachable while II follows the least-response rule,
/// recording II's answer to each possible I move.
fn extract_strategy(solver: &mut Solver<'_>, rounds: usize) -> Strategy {
    let (ln, rn) = (solver.ctx.left_size(), solver.ctx.right_size());
    let mut table = HashMap::new();
    let mut seen: BTreeSet<(Vec<(usize, usize)>, u32)> = BTreeSet::new();
    let mut queue: VecDeque<(Vec<(usize, usize)>, u32)> = VecDeque::new();
    queue.push_back((Vec::new(), rounds as u32));
    while let Some((pairs, r)) = queue.pop_front() {
        if r == 0 || !seen.insert((pairs.clone(), r)) {
            continue;
        }
        let mut assign = vec![UNMAPPED; ln];
        let mut used = vec![false; rn];
        for &(x, y) in &pairs {
            assign[x] = y as u32;
            used[y] = true;
        }
        for x in 0..ln {
            if assign[x] != UNMAPPED {
                continue;
            }
            let y = solver
                .winning_response_left(&mut assign, &mut used, x, r)
                .expect("position marked winning for II");
            table.insert(((pairs.clone(), r), Side::Left, x), y);
            let mut child = pairs.clone();
            child.push((x, y));
            child.sort_unstable();
            queue.push_back((child, r - 1));
        }
        for y in 0..rn {
            if used[y] {
                continue;
            }
            let x = solver
                .winning_response_right(&mut assign, &mut used, y, r)
                .expect("position marked winning for II");
            table.insert(((pairs.clone(), r), Side::Right, y), x);
            let mut child = pairs.clone();
            child.push((x, y));
            child.sort_unstable();
            queue.push_back((child, r - 1));
        }
        // Replayed I moves keep the position; II keeps playing from it.
        queue.push_back((pairs, r - 1));
    }
    Strategy { rounds, table }
}

/// Walk every II-losing position reachable while I follows its least
/// defeating move, recording that move.
fn extract_spoiler(solver: &mut Solver<'_>, rounds: usize) -> SpoilerStrategy {
    let (ln, rn) = (solver.ctx.left_size(), solver.ctx.right_size());
    let mut table = HashMap::new();
    let mut seen: BTreeSet<(Vec<(usize, usize)>, u32)> = BTreeSet::new();
    let mut queue: VecDeque<(Vec<(usize, usize)>, u32)> = VecDeque::new();
    queue.push_back((Vec::new(), rounds as u32));
    while let Some((pairs, r)) = queue.pop_front() {
        if r == 0 || !seen.insert((pairs.clone(), r)) {
            continue;
        }
        let mut assign = vec![UNMAPPED; ln];
        let mut used = vec![false; rn];
        for &(x, y) in &pairs {
            assign[x] = y as u32;
            used[y] = true;
        }
        let mv = defeating_move(solver, &mut assign, &mut used, r)
            .expect("position marked losing for II");
        table.insert((pairs.clone(), r), mv);
        // Every non-violating II response leads to another II-losing position.
        match mv {
            (Side::Left, x) => {
                for y in 0..rn {
                    if used[y] || !solver.ctx.extend_ok(&assign, x, y) {
                        continue;
                    }
                    let mut child = pairs.clone();
                    child.push((x, y));
                    child.sort_unstable();
                    queue.push_back((child, r - 1));
                }
            }
            (Side::Right, y) => {
                for x in 0..ln {
                    if assign[x] != UNMAPPED || !solver.ctx.extend_ok(&assign, x, y) {
                        continue;
                    }
                    let mut child = pairs.clone();
                    child.push((x, y));
                    child.sort_unstable();
                    queue.push_back((child, r - 1));
                }
            }
        }
    }
    SpoilerStrategy {
        rounds,
        plan: SpoilerPlan::Table(table),
    }
}

/// The least fresh I move for which every II response loses.
fn defeating_move(
    solver: &mut Solver<'_>,
    assign: &mut Vec<u32>,
    used: &mut Vec<bool>,
    rounds: u32,
) -> Option<(Side, usize)> {
    for x in 0..solver.ctx.left_size() {
        if assign[x] == UNMAPPED
            && solver
                .winning_response_left(assign, used, x, rounds)
                .is_none()
        {
            return Some((Side::Left, x));
        }
    }
    for y in 0..solver.ctx.right_size() {
        if !used[y]
            && solver
                .winning_response_right(assign, used, y, rounds)
                .is_none()
        {
            return Some((Side::Right, y));
        }
    }
    None
}

/// Solve the full-length game, in which player I can force every element of
/// both structures: length `2m` for universes of size `m`. Unequal sizes
/// resolve to an I win through the plain enumeration line on the larger
/// side. The verdict coincides with `decide_condensable`.
pub fn solve_full_game(pair: StructurePair<'_>) -> GameOutcome {
    let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
    if ln != rn {
        let (side, big, small) = if ln > rn {
            (Side::Left, ln, rn)
        } else {
            (Side::Right, rn, ln)
        };
        let line: Vec<(Side, usize)> = (0..small + 1).map(|e| (side, e)).collect();
        return GameOutcome::IWins(SpoilerStrategy {
            rounds: 2 * big.max(1),
            plan: SpoilerPlan::FixedLine(line),
        });
    }
    solve_game(pair, 2 * ln)
}

// ---------------------------------------------------------------------------
// Round systems
// ---------------------------------------------------------------------------

/// The antitone sequence Π_0 ⊇ Π_1 ⊇ ... of sets of partial condensations
/// from which player II can survive r more rounds, computed by backward
/// induction until it stabilizes.
#[derive(Debug, Clone)]
pub struct RoundSystem {
    pub levels: Vec<BTreeSet<PartialCondensation>>,
    /// Least r with Π_{r+1} = Π_r, when the computation reached it.
    pub stabilization: Option<usize>,
    /// The empty map survives every computed level.
    pub verdict: bool,
}

impl RoundSystem {
    pub fn level(&self, r: usize) -> &BTreeSet<PartialCondensation> {
        &self.levels[r.min(self.levels.len() - 1)]
    }
}

/// Compute the canonical maximal round system: Π_0 is all partial
/// condensations, and Π_{r+1} keeps the members every one-element challenge
/// of which can be answered inside Π_r.
pub fn compute_round_system(pair: StructurePair<'_>, max_r: Option<usize>) -> RoundSystem {
    let ctx = PairCtx::new(pair);
    let (ln, rn) = (ctx.left_size(), ctx.right_size());
    let mut levels: Vec<BTreeSet<PartialCondensation>> = Vec::new();
    let mut current: Vec<PartialCondensation> = all_partial_condensations(pair);
    levels.push(current.iter().cloned().collect());
    let mut stabilization = None;
    let mut r = 0usize;
    loop {
        if let Some(cap) = max_r {
            if r >= cap {
                break;
            }
        }
        let current_set = PcSet::from_members(&current, ln, rn);
        let next: Vec<PartialCondensation> = current
            .iter()
            .filter(|f| survives_one_round(&ctx, f, &current_set, ln, rn))
            .cloned()
            .collect();
        let stable = next.len() == current.len();
        levels.push(next.iter().cloned().collect());
        current = next;
        if stable {
            stabilization = Some(r);
            break;
        }
        r += 1;
    }
    let verdict = levels
        .last()
        .map(|l| l.contains(&PartialCondensation::empty()))
        .unwrap_or(false);
    RoundSystem {
        levels,
        stabilization,
        verdict,
    }
}

fn survives_one_round(
    ctx: &PairCtx<'_>,
    f: &PartialCondensation,
    level: &PcSet,
    ln: usize,
    rn: usize,
) -> bool {
    let assign = assignment_of(f, ln);
    let mut covered_right = vec![false; rn];
    for &(_, y) in f.pairs() {
        covered_right[y] = true;
    }
    for x in 0..ln {
        if assign[x] != UNMAPPED {
            continue;
        }
        let ok = (0..rn).any(|y| {
            !covered_right[y] && ctx.extend_ok(&assign, x, y) && level.contains_one_step(f, x, y)
        });
        if !ok {
            return false;
        }
    }
    for y in 0..rn {
        if covered_right[y] {
            continue;
        }
        let ok = (0..ln).any(|x| {
            assign[x] == UNMAPPED
                && ctx.extend_ok(&assign, x, y)
                && level.contains_one_step(f, x, y)
        });
        if !ok {
            return false;
        }
    }
    true
}

/// Where a level pair breaks the extension conditions.
#[derive(Debug, Clone, Serialize)]
pub struct LevelCounterexample {
    pub level: usize,
    pub member: PartialCondensation,
    pub element: usize,
    pub clause: Side,
}

/// Verify that each adjacent level pair satisfies the two extension
/// conditions: every member of Π_{r+1} extends within Π_r to cover any given
/// left element, and dually any given right element. A one-element extension
/// is probed first; a miss falls back to scanning for larger witnesses.
pub fn verify_round_levels(rs: &RoundSystem, ln: usize, rn: usize) -> Result<(), LevelCounterexample> {
    for r in 0..rs.levels.len() - 1 {
        let (upper, lower) = (&rs.levels[r + 1], &rs.levels[r]);
        let lower_set = PcSet::from_members(lower, ln, rn);
        for f in upper {
            for x in 0..ln {
                let ok = f.image(x).is_some()
                    || (0..rn).any(|y| {
                        f.preimage(y).is_none() && lower_set.contains_one_step(f, x, y)
                    })
                    || lower
                        .iter()
                        .any(|g| g.image(x).is_some() && f.is_restriction_of(g));
                if !ok {
                    return Err(LevelCounterexample {
                        level: r,
                        member: f.clone(),
                        element: x,
                        clause: Side::Left,
                    });
                }
            }
            for y in 0..rn {
                let ok = f.preimage(y).is_some()
                    || (0..ln).any(|x| {
                        f.image(x).is_none() && lower_set.contains_one_step(f, x, y)
                    })
                    || lower
                        .iter()
                        .any(|g| g.preimage(y).is_some() && f.is_restriction_of(g));
                if !ok {
                    return Err(LevelCounterexample {
                        level: r,
                        member: f.clone(),
                        element: y,
                        clause: Side::Right,
                    });
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Winner {
    I,
    II,
}

#[derive(Debug, Clone)]
pub struct ReplayVerdict {
    pub winner: Winner,
    pub violation: Option<PcViolation>,
    pub final_pairs: Vec<(usize, usize)>,
}

/// Recompute the final pair set of a transcript, run the partial
/// condensation check, and declare the winner.
pub fn replay(
    pair: StructurePair<'_>,
    transcript: &[TranscriptEntry],
) -> Result<ReplayVerdict, GameError> {
    let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
    for e in transcript {
        let (x, y) = e.pair();
        if x >= ln || y >= rn {
            return Err(GameError::MalformedTranscript(format!(
                "pair ({x},{y}) out of range for universes {ln} and {rn}"
            )));
        }
    }
    let pairs: Vec<(usize, usize)> = transcript.iter().map(|e| e.pair()).collect();
    let outcome = check_partial(pair, &pairs)
        .map_err(|e| GameError::MalformedTranscript(e.to_string()))?;
    Ok(match outcome {
        CheckOutcome::Accepted(pc) => ReplayVerdict {
            winner: Winner::II,
            violation: None,
            final_pairs: pc.pairs().to_vec(),
        },
        CheckOutcome::Violation(v) => {
            let mut sorted = pairs;
            sorted.sort_unstable();
            sorted.dedup();
            ReplayVerdict {
                winner: Winner::I,
                violation: Some(v),
                final_pairs: sorted,
            }
        }
    })
}

/// The line a spoiler strategy realizes against II's canonical defense
/// (least non-violating response, else least element).
pub fn principal_spoiling_line(
    pair: StructurePair<'_>,
    spoiler: &SpoilerStrategy,
) -> Vec<TranscriptEntry> {
    let ctx = PairCtx::new(pair);
    let mut history: Vec<TranscriptEntry> = Vec::new();
    for _ in 0..spoiler.rounds {
        let Ok((side, mv)) = spoiler.next_move(&history) else {
            break;
        };
        let Some(resp) = canonical_defense(&ctx, &history, side, mv) else {
            break; // II cannot respond at all; the play ends here
        };
        history.push(TranscriptEntry { side, mv, resp });
        let pairs: Vec<(usize, usize)> = history.iter().map(|e| e.pair()).collect();
        if !matches!(
            check_partial(pair, &pairs),
            Ok(CheckOutcome::Accepted(_))
        ) {
            break; // violation reached, I has won
        }
    }
    history
}

fn canonical_defense(
    ctx: &PairCtx<'_>,
    history: &[TranscriptEntry],
    side: Side,
    mv: usize,
) -> Option<usize> {
    let pairs = pairs_of_history(history);
    let mut assign = vec![UNMAPPED; ctx.left_size()];
    let mut used = vec![false; ctx.right_size()];
    for &(x, y) in &pairs {
        assign[x] = y as u32;
        used[y] = true;
    }
    match side {
        Side::Left => {
            if assign.get(mv).is_some_and(|&y| y != UNMAPPED) {
                return Some(assign[mv] as usize);
            }
            (0..ctx.right_size())
                .find(|&y| !used[y] && ctx.extend_ok(&assign, mv, y))
                .or_else(|| (ctx.right_size() > 0).then_some(0))
        }
        Side::Right => {
            if let Some(&(x, _)) = pairs.iter().find(|&&(_, y)| y == mv) {
                return Some(x);
            }
            (0..ctx.left_size())
                .find(|&x| assign[x] == UNMAPPED && ctx.extend_ok(&assign, x, mv))
                .or_else(|| (ctx.left_size() > 0).then_some(0))
        }
    }
}

// ---------------------------------------------------------------------------
// Interactive play
// ---------------------------------------------------------------------------

/// Play an n-round game on a console-like transport: the human takes
/// `human_side`, the machine answers from the solved game. Illegal input is
/// re-prompted. Returns the transcript; the final verdict comes from
/// `replay`.
pub fn play_interactive<R: BufRead, W: Write>(
    pair: StructurePair<'_>,
    rounds: usize,
    human_side: Player,
    input: &mut R,
    output: &mut W,
) -> Result<Vec<TranscriptEntry>, GameError> {
    let outcome = solve_game(pair, rounds);
    let ctx = PairCtx::new(pair);
    let mut history: Vec<TranscriptEntry> = Vec::new();
    writeln!(
        output,
        "{} rounds; left universe {}, right universe {}",
        rounds,
        pair.left().universe_size(),
        pair.right().universe_size()
    )?;
    for round in 0..rounds {
        match human_side {
            Player::I => {
                let (side, mv) = prompt_move(pair, input, output, round)?;
                let resp = match outcome.strategy() {
                    Some(s) => s
                        .respond(pair, &history, side, mv)
                        .ok()
                        .or_else(|| canonical_defense(&ctx, &history, side, mv)),
                    None => canonical_defense(&ctx, &history, side, mv),
                };
                let Some(resp) = resp else {
                    writeln!(output, "machine cannot respond; play ends")?;
                    break;
                };
                writeln!(output, "machine answers {resp}")?;
                history.push(TranscriptEntry { side, mv, resp });
            }
            Player::II => {
                let (side, mv) = match outcome.spoiler().and_then(|s| s.next_move(&history).ok()) {
                    Some(m) => m,
                    None => enumeration_move(pair, &history),
                };
                writeln!(
                    output,
                    "machine plays {} {mv}",
                    if side == Side::Left { "L" } else { "R" }
                )?;
                let resp = prompt_response(pair, side, input, output)?;
                history.push(TranscriptEntry { side, mv, resp });
            }
        }
    }
    let verdict = replay(pair, &history)?;
    match verdict.winner {
        Winner::II => writeln!(output, "player II wins: the pair set is a partial condensation")?,
        Winner::I => writeln!(
            output,
            "player I wins: {}",
            verdict
                .violation
                .map(|v| v.to_string())
                .unwrap_or_else(|| "violation".to_string())
        )?,
    }
    Ok(history)
}

/// Player I's fallback move when it has no winning strategy: enumerate the
/// left structure, then the right one.
fn enumeration_move(pair: StructurePair<'_>, history: &[TranscriptEntry]) -> (Side, usize) {
    let k = history.len();
    let ln = pair.left().universe_size();
    if k < ln {
        (Side::Left, k)
    } else {
        (Side::Right, (k - ln) % pair.right().universe_size().max(1))
    }
}

fn prompt_move<R: BufRead, W: Write>(
    pair: StructurePair<'_>,
    input: &mut R,
    output: &mut W,
    round: usize,
) -> Result<(Side, usize), GameError> {
    loop {
        write!(output, "round {round}: your move (e.g. 'L 0' or 'R 2'): ")?;
        output.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(GameError::MalformedTranscript("input closed".to_string()));
        }
        let mut parts = line.split_whitespace();
        let side = match parts.next() {
            Some("L") | Some("l") => Side::Left,
            Some("R") | Some("r") => Side::Right,
            _ => {
                writeln!(output, "unrecognized side; use L or R")?;
                continue;
            }
        };
        let universe = match side {
            Side::Left => pair.left().universe_size(),
            Side::Right => pair.right().universe_size(),
        };
        match parts.next().and_then(|t| t.parse::<usize>().ok()) {
            Some(e) if e < universe => return Ok((side, e)),
            _ => writeln!(output, "element out of range (universe {universe})")?,
        }
    }
}

fn prompt_response<R: BufRead, W: Write>(
    pair: StructurePair<'_>,
    side: Side,
    input: &mut R,
    output: &mut W,
) -> Result<usize, GameError> {
    let universe = match side {
        Side::Left => pair.right().universe_size(),
        Side::Right => pair.left().universe_size(),
    };
    loop {
        write!(output, "your response (0..{universe}): ")?;
        output.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(GameError::MalformedTranscript("input closed".to_string()));
        }
        match line.trim().parse::<usize>() {
            Ok(e) if e < universe => return Ok(e),
            _ => writeln!(output, "element out of range")?,
        }
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
pub(crate) mod testkit {
    use super::*;

    /// Replay every I-move sequence of the given length against a responder;
    /// true when II wins all of them.
    pub(crate) fn all_i_lines_lose_for_i(
        pair: StructurePair<'_>,
        strategy: &dyn Responder,
        rounds: usize,
        history: &mut Vec<TranscriptEntry>,
    ) -> bool {
        if history.len() == rounds {
            return replay(pair, history).unwrap().winner == Winner::II;
        }
        let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
        let mut i_moves: Vec<(Side, usize)> = Vec::new();
        i_moves.extend((0..ln).map(|x| (Side::Left, x)));
        i_moves.extend((0..rn).map(|y| (Side::Right, y)));
        if i_moves.is_empty() {
            return replay(pair, history).unwrap().winner == Winner::II;
        }
        for (side, mv) in i_moves {
            let resp = strategy.respond(pair, history, side, mv).unwrap();
            history.push(TranscriptEntry { side, mv, resp });
            let ok = all_i_lines_lose_for_i(pair, strategy, rounds, history);
            history.pop();
            if !ok {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::testkit::all_i_lines_lose_for_i;
    use super::*;
    use crate::structure::{enumerate_all, parse_structure, FiniteStructure, Signature};

    fn a2() -> FiniteStructure {
        parse_structure(r#"{"sig":[["R",2]],"n":2,"rels":{"R":[[0,0],[1,1]]}}"#).unwrap()
    }

    fn b2() -> FiniteStructure {
        parse_structure(r#"{"sig":[["R",2]],"n":2,"rels":{"R":[[0,0],[0,1],[1,0],[1,1]]}}"#)
            .unwrap()
    }

    /// Unpruned oracle: evaluate the winner on fully played-out move trees,
    /// checking the PC condition only on the completed pair set. I is
    /// allowed every move including replays; II every response.
    fn ii_wins_unpruned(pair: StructurePair<'_>, pairs: &mut Vec<(usize, usize)>, r: usize) -> bool {
        if r == 0 {
            return check_partial(pair, pairs).unwrap().is_accepted();
        }
        let (ln, rn) = (pair.left().universe_size(), pair.right().universe_size());
        if ln == 0 && rn == 0 {
            return check_partial(pair, pairs).unwrap().is_accepted();
        }
        let mut i_moves: Vec<(Side, usize)> = Vec::new();
        i_moves.extend((0..ln).map(|x| (Side::Left, x)));
        i_moves.extend((0..rn).map(|y| (Side::Right, y)));
        i_moves.into_iter().all(|(side, mv)| {
            let responses: Vec<usize> = match side {
                Side::Left => (0..rn).collect(),
                Side::Right => (0..ln).collect(),
            };
            if responses.is_empty() {
                return false; // II is stuck
            }
            responses.into_iter().any(|resp| {
                let p = match side {
                    Side::Left => (mv, resp),
                    Side::Right => (resp, mv),
                };
                pairs.push(p);
                let win = ii_wins_unpruned(pair, pairs, r - 1);
                pairs.pop();
                win
            })
        })
    }

    #[test]
    fn frozen_two_element_games() {
        let (a, b) = (a2(), b2());
        let ab = StructurePair::new(&a, &b).unwrap();
        let ba = StructurePair::new(&b, &a).unwrap();
        let out = solve_game(ab, 2);
        assert!(out.ii_wins());
        // Least-index extraction: x = 0 gets the identity response, x = 1
        // gets 0 (the swap bijection also preserves into the full relation).
        let strategy = out.strategy().unwrap();
        assert_eq!(strategy.respond(ab, &[], Side::Left, 0).unwrap(), 0);
        assert_eq!(strategy.respond(ab, &[], Side::Left, 1).unwrap(), 0);
        assert!(!solve_game(ba, 2).ii_wins());
        assert!(solve_game(ba, 1).ii_wins(), "one round is survivable");
        assert!(solve_game(ba, 0).ii_wins(), "empty play is a II win");

        // The spoiler line: I forces both left elements.
        let out = solve_game(ba, 2);
        let line = principal_spoiling_line(ba, out.spoiler().unwrap());
        assert_eq!(line.len(), 2);
        assert!(line.iter().all(|e| e.side == Side::Left));
        assert_eq!(replay(ba, &line).unwrap().winner, Winner::I);
    }

    #[test]
    fn pruned_solver_matches_unpruned_replay_oracle() {
        let sig = Signature::binary("R");
        let mut structures: Vec<FiniteStructure> = Vec::new();
        for n in 0..=2 {
            structures.extend(enumerate_all(&sig, n));
        }
        for x in &structures {
            for y in &structures {
                let pair = StructurePair::new(x, y).unwrap();
                for r in 0..=3 {
                    let slow = ii_wins_unpruned(pair, &mut Vec::new(), r);
                    assert_eq!(
                        solve_game(pair, r).ii_wins(),
                        slow,
                        "pair ({x}, {y}) at {r} rounds"
                    );
                }
            }
        }
    }

    #[test]
    fn strategy_survives_every_i_line() {
        let sig = Signature::binary("R");
        let mut structures: Vec<FiniteStructure> = Vec::new();
        for n in 1..=2 {
            structures.extend(enumerate_all(&sig, n));
        }
        for x in &structures {
            for y in &structures {
                let pair = StructurePair::new(x, y).unwrap();
                let rounds = 3;
                let GameOutcome::IiWins(strategy) = solve_game(pair, rounds) else {
                    continue;
                };
                assert!(all_i_lines_lose_for_i(pair, &strategy, rounds, &mut Vec::new()));
            }
        }
    }

    /// Random-line soundness at sizes where exhaustive replay is too wide:
    /// II's extracted strategy survives sampled I-move sequences.
    #[test]
    fn strategy_survives_sampled_lines_on_larger_pairs() {
        use rand::{Rng, SeedableRng};
        let sig = Signature::binary("R");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut winning_pairs = 0usize;
        for (x, y) in crate::corpus::constructed_condensable_pairs(&sig, 4, 8, 17) {
            let pair = StructurePair::new(&x, &y).unwrap();
            let rounds = 5;
            let GameOutcome::IiWins(strategy) = solve_game(pair, rounds) else {
                continue;
            };
            winning_pairs += 1;
            for _ in 0..200 {
                let mut history: Vec<TranscriptEntry> = Vec::new();
                for _ in 0..rounds {
                    let (side, universe) = if rng.gen_bool(0.5) {
                        (Side::Left, x.universe_size())
                    } else {
                        (Side::Right, y.universe_size())
                    };
                    let mv = rng.gen_range(0..universe);
                    let resp = strategy.respond(pair, &history, side, mv).unwrap();
                    history.push(TranscriptEntry { side, mv, resp });
                }
                assert_eq!(replay(pair, &history).unwrap().winner, Winner::II);
            }
        }
        assert!(winning_pairs > 0, "corpus produced no winnable games");
    }

    /// Universes past the dense-key bound take the wide position-key and
    /// general set paths; a complete left relation against an empty right
    /// one keeps the search spaces tiny there.
    #[test]
    fn wide_universes_use_the_general_paths() {
        let sig = Signature::binary("R");
        let n = 18;
        let mut left = FiniteStructure::empty(sig.clone(), n);
        for t in crate::structure::all_tuples(n, 2) {
            left.insert_tuple(0, t).unwrap();
        }
        let right = FiniteStructure::empty(sig.clone(), n);
        let pair = StructurePair::new(&left, &right).unwrap();
        assert!(solve_game(pair, 0).ii_wins());
        assert!(!solve_game(pair, 1).ii_wins(), "any response loses a loop");
        let rs = compute_round_system(pair, None);
        assert!(!rs.verdict);
        assert_eq!(rs.levels[0].len(), 1, "only the empty map preserves");
        verify_round_levels(&rs, n, n).unwrap();
        assert!(crate::bfs::maximal_bfs(pair).is_none());
        // The flipped pair maps nothing into everything: any bijection is a
        // condensation (only the backtracking route stays cheap out here).
        assert!(crate::condensation::decide_condensable(pair.flip()).is_condensable());
    }

    #[test]
    fn stabilization_is_bounded_by_the_member_count() {
        let sig = Signature::binary("R");
        for seed in 0..20u64 {
            let x = crate::structure::generate_random(&sig, 4, 0.4, seed);
            let y = crate::structure::generate_random(&sig, 4, 0.5, seed + 100);
            let pair = StructurePair::new(&x, &y).unwrap();
            let rs = compute_round_system(pair, None);
            let members = rs.levels[0].len();
            assert!(rs.stabilization.unwrap() <= members + 1);
        }
    }

    #[test]
    fn spoiler_defeats_every_ii_response() {
        let sig = Signature::binary("R");
        let mut structures: Vec<FiniteStructure> = Vec::new();
        for n in 1..=2 {
            structures.extend(enumerate_all(&sig, n));
        }
        for x in &structures {
            for y in &structures {
                let pair = StructurePair::new(x, y).unwrap();
                let rounds = 3;
                let GameOutcome::IWins(spoiler) = solve_game(pair, rounds) else {
                    continue;
                };
                assert!(spoiler_always_wins(pair, &spoiler, rounds, &mut Vec::new()));
            }
        }
    }

    fn spoiler_always_wins(
        pair: StructurePair<'_>,
        spoiler: &SpoilerStrategy,
        rounds: usize,
        history: &mut Vec<TranscriptEntry>,
    ) -> bool {
        if history.len() == rounds {
            return replay(pair, history).unwrap().winner == Winner::I;
        }
        let pairs: Vec<(usize, usize)> = history.iter().map(|e| e.pair()).collect();
        if !check_partial(pair, &pairs).unwrap().is_accepted() {
            return true; // violation is monotone: I has already won
        }
        let (side, mv) = spoiler.next_move(history).unwrap();
        let responses: Vec<usize> = match side {
            Side::Left => (0..pair.right().universe_size()).collect(),
            Side::Right => (0..pair.left().universe_size()).collect(),
        };
        if responses.is_empty() {
            return true; // II cannot answer
        }
        for resp in responses {
            history.push(TranscriptEntry { side, mv, resp });
            let ok = spoiler_always_wins(pair, spoiler, rounds, history);
            history.pop();
            if !ok {
                return false;
            }
        }
        true
    }

    #[test]
    fn full_game_matches_condensability() {
        use crate::condensation::decide_condensable;
        let sig = Signature::binary("R");
        let mut structures: Vec<FiniteStructure> = Vec::new();
        for n in 0..=2 {
            structures.extend(enumerate_all(&sig, n));
        }
        for x in &structures {
            for y in &structures {
                if x.universe_size() != y.universe_size() {
                    continue;
                }
                let pair = StructurePair::new(x, y).unwrap();
                assert_eq!(
                    solve_full_game(pair).ii_wins(),
                    decide_condensable(pair).is_condensable()
                );
            }
        }
        // Unequal sizes are an I win via the enumeration line.
        let small = FiniteStructure::empty(sig.clone(), 1);
        let large = FiniteStructure::empty(sig.clone(), 3);
        let pair = StructurePair::new(&small, &large).unwrap();
        let out = solve_full_game(pair);
        assert!(!out.ii_wins());
        let line = principal_spoiling_line(pair, out.spoiler().unwrap());
        assert_eq!(replay(pair, &line).unwrap().winner, Winner::I);
    }

    #[test]
    fn round_system_frozen_examples() {
        let (a, b) = (a2(), b2());
        let ab = StructurePair::new(&a, &b).unwrap();
        let rs = compute_round_system(ab, None);
        assert!(rs.verdict);
        assert_eq!(rs.stabilization, Some(0), "all seven members self-support");
        assert_eq!(rs.levels[0].len(), 7);
        verify_round_levels(&rs, 2, 2).unwrap();

        let ba = StructurePair::new(&b, &a).unwrap();
        let rs = compute_round_system(ba, None);
        assert!(!rs.verdict);
        assert_eq!(rs.stabilization, Some(2));
        let sizes: Vec<usize> = rs.levels.iter().map(|l| l.len()).collect();
        assert_eq!(sizes, vec![5, 1, 0, 0]);
        verify_round_levels(&rs, 2, 2).unwrap();

        // Self pair: every restriction of the identity survives forever.
        let aa = StructurePair::new(&a, &a).unwrap();
        let rs = compute_round_system(aa, None);
        assert!(rs.verdict);
        let last = rs.levels.last().unwrap();
        let id = PartialCondensation::from_sorted(vec![(0, 0), (1, 1)]);
        assert!(last.contains(&id));
        assert!(last.contains(&PartialCondensation::from_sorted(vec![(0, 0)])));
    }

    #[test]
    fn round_levels_match_game_survival() {
        let sig = Signature::binary("R");
        let mut structures: Vec<FiniteStructure> = Vec::new();
        for n in 0..=2 {
            structures.extend(enumerate_all(&sig, n));
        }
        for x in &structures {
            for y in &structures {
                let pair = StructurePair::new(x, y).unwrap();
                let rs = compute_round_system(pair, None);
                for (r, level) in rs.levels.iter().enumerate() {
                    for f in &rs.levels[0] {
                        assert_eq!(level.contains(f), ii_wins_from(pair, f, r));
                    }
                }
            }
        }
    }

    #[test]
    fn round_monotonicity() {
        let sig = Signature::binary("R");
        for seed in 0..30u64 {
            let x = crate::structure::generate_random(&sig, 3, 0.4, seed);
            let y = crate::structure::generate_random(&sig, 3, 0.5, seed + 50);
            let pair = StructurePair::new(&x, &y).unwrap();
            let wins: Vec<bool> = (0..=6).map(|n| solve_game(pair, n).ii_wins()).collect();
            // II winning the longer game implies winning the shorter one.
            for n in 0..6 {
                assert!(
                    !(wins[n + 1] && !wins[n]),
                    "monotonicity broken between {} and {} rounds",
                    n + 1,
                    n
                );
            }
        }
    }

    #[test]
    fn replay_examples() {
        let (a, b) = (a2(), b2());
        let ab = StructurePair::new(&a, &b).unwrap();
        assert_eq!(replay(ab, &[]).unwrap().winner, Winner::II);
        let t = vec![
            TranscriptEntry {
                side: Side::Left,
                mv: 0,
                resp: 0,
            },
            TranscriptEntry {
                side: Side::Left,
                mv: 1,
                resp: 1,
            },
        ];
        assert_eq!(replay(ab, &t).unwrap().winner, Winner::II);
        let ba = StructurePair::new(&b, &a).unwrap();
        let v = replay(ba, &t).unwrap();
        assert_eq!(v.winner, Winner::I);
        assert!(matches!(v.violation, Some(PcViolation::TupleLoss { .. })));
        let bad = vec![TranscriptEntry {
            side: Side::Left,
            mv: 7,
            resp: 0,
        }];
        assert!(matches!(
            replay(ab, &bad),
            Err(GameError::MalformedTranscript(_))
        ));
    }

    #[test]
    fn transcript_json_shape() {
        let e = TranscriptEntry {
            side: Side::Left,
            mv: 1,
            resp: 0,
        };
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"side":"L","move":1,"resp":0}"#
        );
        let back: TranscriptEntry =
            serde_json::from_str(r#"{"side":"R","move":2,"resp":3}"#).unwrap();
        assert_eq!(back.side, Side::Right);
        assert_eq!((back.mv, back.resp), (2, 3));
    }

    #[test]
    fn interactive_play_round_trip() {
        let (a, b) = (a2(), b2());
        let ab = StructurePair::new(&a, &b).unwrap();
        // Human plays I, one illegal move first (re-prompted), then L 0.
        let mut input = std::io::Cursor::new(b"L 9\nL 0\n".to_vec());
        let mut output = Vec::new();
        let t = play_interactive(ab, 1, Player::I, &mut input, &mut output).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(replay(ab, &t).unwrap().winner, Winner::II);
        let text = String::from_utf8(output).unwrap();
        assert!(text.contains("out of range"));
        assert!(text.contains("player II wins"));

        // n = 0: immediate II win, empty transcript.
        let mut input = std::io::Cursor::new(Vec::new());
        let mut output = Vec::new();
        let t = play_interactive(ab, 0, Player::I, &mut input, &mut output).unwrap();
        assert!(t.is_empty());

        // Human plays II against the spoiler.
        let ba = StructurePair::new(&b, &a).unwrap();
        let mut input = std::io::Cursor::new(b"0\n1\n".to_vec());
        let mut output = Vec::new();
        let t = play_interactive(ba, 2, Player::II, &mut input, &mut output).unwrap();
        assert_eq!(replay(ba, &t).unwrap().winner, Winner::I);

        // Machine takes II on a pair it cannot win: best-effort responses,
        // the human spoiler prevails.
        let mut input = std::io::Cursor::new(b"L 0\nL 1\n".to_vec());
        let mut output = Vec::new();
        let t = play_interactive(ba, 2, Player::I, &mut input, &mut output).unwrap();
        assert_eq!(replay(ba, &t).unwrap().winner, Winner::I);
        let text = String::from_utf8(output).unwrap();
        assert!(text.contains("player I wins"));
    }
}
