//! Formula ASTs for the R-positive, R-negative and full first-order
//! fragments, Tarskian model checking, quantifier rank, and the syntactic
//! ¬-dual that swaps the two fragments.
//!
//! Variables are natural-number indices `v0, v1, ...`. Negated equality and
//! negated relation atoms are dedicated leaves, so fragment membership is a
//! plain syntactic scan. The dedicated truth constants are `v0 = v0` and
//! `¬ v0 = v0`; same-variable atoms evaluate without consulting the
//! valuation, which keeps them usable as closed constants.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::structure::{FiniteStructure, Signature};

pub type Var = usize;

#[derive(Debug, Error)]
pub enum LogicError {
    #[error("valuation does not cover free variable v{0}")]
    UncoveredVariable(Var),
    #[error("formula mentions unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("relation {name:?} has arity {expected}, used with {got} variables")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("parse error at byte {at}: {msg}")]
    Parse { at: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    /// v_i = v_j
    Eq(Var, Var),
    /// ¬ v_i = v_j
    Neq(Var, Var),
    /// R(v_{i1}, ..., v_{ik})
    Rel(String, Vec<Var>),
    /// ¬ R(v_{i1}, ..., v_{ik})
    NegRel(String, Vec<Var>),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Var, Box<Formula>),
    Forall(Var, Box<Formula>),
}

impl Formula {
    /// The truth constant, encoded as `v0 = v0`.
    pub fn tru() -> Formula {
        Formula::Eq(0, 0)
    }

    /// The falsity constant, encoded as `¬ v0 = v0`.
    pub fn fals() -> Formula {
        Formula::Neq(0, 0)
    }

    /// Conjunction; empty input collapses to the truth constant.
    pub fn and(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            0 => Formula::tru(),
            1 => parts.pop().unwrap(),
            _ => Formula::And(parts),
        }
    }

    /// Disjunction; empty input collapses to the falsity constant.
    pub fn or(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            0 => Formula::fals(),
            1 => parts.pop().unwrap(),
            _ => Formula::Or(parts),
        }
    }

    pub fn exists(v: Var, body: Formula) -> Formula {
        Formula::Exists(v, Box::new(body))
    }

    pub fn forall(v: Var, body: Formula) -> Formula {
        Formula::Forall(v, Box::new(body))
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut acc = BTreeSet::new();
        self.collect_free(&mut acc);
        acc
    }

    fn collect_free(&self, acc: &mut BTreeSet<Var>) {
        match self {
            Formula::Eq(i, j) | Formula::Neq(i, j) => {
                acc.insert(*i);
                acc.insert(*j);
            }
            Formula::Rel(_, vars) | Formula::NegRel(_, vars) => acc.extend(vars.iter().copied()),
            Formula::Not(f) => f.collect_free(acc),
            Formula::And(fs) | Formula::Or(fs) => {
                for f in fs {
                    f.collect_free(acc);
                }
            }
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                let mut inner = BTreeSet::new();
                f.collect_free(&mut inner);
                inner.remove(v);
                acc.extend(inner);
            }
        }
    }

    /// Close all free variables existentially (ascending variable order),
    /// turning a formula into a sentence.
    pub fn close_existentially(self) -> Formula {
        let fv = self.free_vars();
        let mut out = self;
        for v in fv.into_iter().rev() {
            out = Formula::exists(v, out);
        }
        out
    }
}

/// Standard quantifier rank: atoms are 0, connectives take the maximum,
/// each quantifier adds one.
pub fn quantifier_rank(f: &Formula) -> usize {
    match f {
        Formula::Eq(..) | Formula::Neq(..) | Formula::Rel(..) | Formula::NegRel(..) => 0,
        Formula::Not(g) => quantifier_rank(g),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().map(quantifier_rank).max().unwrap_or(0),
        Formula::Exists(_, g) | Formula::Forall(_, g) => 1 + quantifier_rank(g),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FragmentTag {
    Positive,
    Negative,
    FullFo,
}

/// Membership in the R-positive closure: no `Not`, no `NegRel`.
pub fn in_positive(f: &Formula) -> bool {
    match f {
        Formula::Eq(..) | Formula::Neq(..) | Formula::Rel(..) => true,
        Formula::NegRel(..) | Formula::Not(_) => false,
        Formula::And(fs) | Formula::Or(fs) => fs.iter().all(in_positive),
        Formula::Exists(_, g) | Formula::Forall(_, g) => in_positive(g),
    }
}

/// Membership in the R-negative closure: no `Not`, no `Rel`.
pub fn in_negative(f: &Formula) -> bool {
    match f {
        Formula::Eq(..) | Formula::Neq(..) | Formula::NegRel(..) => true,
        Formula::Rel(..) | Formula::Not(_) => false,
        Formula::And(fs) | Formula::Or(fs) => fs.iter().all(in_negative),
        Formula::Exists(_, g) | Formula::Forall(_, g) => in_negative(g),
    }
}

/// Most specific fragment tag. Formulas built from equality atoms alone lie
/// in both closures and report `Positive`.
pub fn fragment_of(f: &Formula) -> FragmentTag {
    if in_positive(f) {
        FragmentTag::Positive
    } else if in_negative(f) {
        FragmentTag::Negative
    } else {
        FragmentTag::FullFo
    }
}

/// The ¬-dual: atoms swap with their negated forms, `Not` cancels,
/// conjunction and disjunction swap, and the quantifiers swap.
///
/// The result is pointwise equivalent to the negation and exchanges the
/// positive and negative fragments.
pub fn neg_dual(f: &Formula) -> Formula {
    match f {
        Formula::Eq(i, j) => Formula::Neq(*i, *j),
        Formula::Neq(i, j) => Formula::Eq(*i, *j),
        Formula::Rel(name, vars) => Formula::NegRel(name.clone(), vars.clone()),
        Formula::NegRel(name, vars) => Formula::Rel(name.clone(), vars.clone()),
        Formula::Not(g) => (**g).clone(),
        Formula::And(fs) => Formula::Or(fs.iter().map(neg_dual).collect()),
        Formula::Or(fs) => Formula::And(fs.iter().map(neg_dual).collect()),
        Formula::Exists(v, g) => Formula::forall(*v, neg_dual(g)),
        Formula::Forall(v, g) => Formula::exists(*v, neg_dual(g)),
    }
}

/// A finite assignment of structure elements to variables.
pub type Valuation = BTreeMap<Var, usize>;

struct EvalCtx<'a> {
    s: &'a FiniteStructure,
    env: Vec<(Var, usize)>,
}

impl EvalCtx<'_> {
    fn lookup(&self, v: Var) -> Result<usize, LogicError> {
        self.env
            .iter()
            .rev()
            .find(|(u, _)| *u == v)
            .map(|(_, e)| *e)
            .ok_or(LogicError::UncoveredVariable(v))
    }

    fn eval(&mut self, f: &Formula) -> Result<bool, LogicError> {
        match f {
            Formula::Eq(i, j) => {
                if i == j {
                    return Ok(true);
                }
                Ok(self.lookup(*i)? == self.lookup(*j)?)
            }
            Formula::Neq(i, j) => {
                if i == j {
                    return Ok(false);
                }
                Ok(self.lookup(*i)? != self.lookup(*j)?)
            }
            Formula::Rel(name, vars) => self.eval_atom(name, vars),
            Formula::NegRel(name, vars) => Ok(!self.eval_atom(name, vars)?),
            Formula::Not(g) => Ok(!self.eval(g)?),
            Formula::And(fs) => {
                for g in fs {
                    if !self.eval(g)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(fs) => {
                for g in fs {
                    if self.eval(g)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Exists(v, g) => {
                for e in 0..self.s.universe_size() {
                    self.env.push((*v, e));
                    let hit = self.eval(g)?;
                    self.env.pop();
                    if hit {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Forall(v, g) => {
                for e in 0..self.s.universe_size() {
                    self.env.push((*v, e));
                    let hit = self.eval(g)?;
                    self.env.pop();
                    if !hit {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }

    fn eval_atom(&self, name: &str, vars: &[Var]) -> Result<bool, LogicError> {
        let rel = self
            .s
            .sig()
            .index_of(name)
            .ok_or_else(|| LogicError::UnknownRelation(name.to_string()))?;
        let arity = self.s.sig().arity(rel);
        if vars.len() != arity {
            return Err(LogicError::ArityMismatch {
                name: name.to_string(),
                expected: arity,
                got: vars.len(),
            });
        }
        let mut tuple = [0usize; 8];
        if arity <= 8 {
            for (slot, v) in vars.iter().enumerate() {
                tuple[slot] = self.lookup(*v)?;
            }
            Ok(self.s.has_tuple(rel, &tuple[..arity]))
        } else {
            let tuple: Vec<usize> = vars
                .iter()
                .map(|v| self.lookup(*v))
                .collect::<Result<_, _>>()?;
            Ok(self.s.has_tuple(rel, &tuple))
        }
    }
}

/// Standard Tarskian satisfaction with quantifiers ranging over the finite
/// universe. The valuation must cover every free variable of `f` (the
/// same-variable atoms `v = v`, `¬ v = v` excepted).
pub fn model_check(
    s: &FiniteStructure,
    f: &Formula,
    val: &Valuation,
) -> Result<bool, LogicError> {
    let mut ctx = EvalCtx {
        s,
        env: val.iter().map(|(&v, &e)| (v, e)).collect(),
    };
    ctx.eval(f)
}

/// Satisfaction of a sentence (empty valuation).
pub fn holds(s: &FiniteStructure, f: &Formula) -> Result<bool, LogicError> {
    model_check(s, f, &Valuation::new())
}

// ---------------------------------------------------------------------------
// Text syntax
// ---------------------------------------------------------------------------

impl fmt::Display for Formula {
    /// S-expression form: `(= i j)`, `(!= i j)`, `(R i j)`, `(!R i j)`,
    /// `(not f)`, `(and f ...)`, `(or f ...)`, `(exists i f)`, `(forall i f)`.
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Eq(i, j) => write!(out, "(= {i} {j})"),
            Formula::Neq(i, j) => write!(out, "(!= {i} {j})"),
            Formula::Rel(name, vars) => {
                write!(out, "({name}")?;
                for v in vars {
                    write!(out, " {v}")?;
                }
                write!(out, ")")
            }
            Formula::NegRel(name, vars) => {
                write!(out, "(!{name}")?;
                for v in vars {
                    write!(out, " {v}")?;
                }
                write!(out, ")")
            }
            Formula::Not(f) => write!(out, "(not {f})"),
            Formula::And(fs) => {
                write!(out, "(and")?;
                for f in fs {
                    write!(out, " {f}")?;
                }
                write!(out, ")")
            }
            Formula::Or(fs) => {
                write!(out, "(or")?;
                for f in fs {
                    write!(out, " {f}")?;
                }
                write!(out, ")")
            }
            Formula::Exists(v, f) => write!(out, "(exists {v} {f})"),
            Formula::Forall(v, f) => write!(out, "(forall {v} {f})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LogicError> {
        Err(LogicError::Parse {
            at: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), LogicError> {
        self.skip_ws();
        if self.pos < self.src.len() && self.src[self.pos] == b {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {:?}", b as char))
        }
    }

    fn token(&mut self) -> Result<&'a str, LogicError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && !self.src[self.pos].is_ascii_whitespace()
            && self.src[self.pos] != b'('
            && self.src[self.pos] != b')'
        {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected token");
        }
        Ok(std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice"))
    }

    fn var(&mut self) -> Result<Var, LogicError> {
        let tok = self.token()?;
        tok.parse::<usize>()
            .or_else(|_| match tok.parse() {
                Ok(v) => Ok(v),
                Err(_) => Err(()),
            })
            .map_err(|_| LogicError::Parse {
                at: self.pos,
                msg: format!("expected variable index, got {tok:?}"),
            })
    }

    fn var_list(&mut self) -> Result<Vec<Var>, LogicError> {
        let mut vars = Vec::new();
        loop {
            self.skip_ws();
            if self.pos < self.src.len() && self.src[self.pos] == b')' {
                break;
            }
            vars.push(self.var()?);
        }
        Ok(vars)
    }

    fn formula(&mut self) -> Result<Formula, LogicError> {
        self.expect(b'(')?;
        let head = self.token()?;
        let f = match head {
            "=" => Formula::Eq(self.var()?, self.var()?),
            "!=" => Formula::Neq(self.var()?, self.var()?),
            "not" => Formula::Not(Box::new(self.formula()?)),
            "and" | "or" => {
                let mut parts = Vec::new();
                loop {
                    self.skip_ws();
                    if self.pos < self.src.len() && self.src[self.pos] == b')' {
                        break;
                    }
                    parts.push(self.formula()?);
                }
                if parts.is_empty() {
                    return self.err(format!("empty ({head} ...)"));
                }
                if head == "and" {
                    Formula::And(parts)
                } else {
                    Formula::Or(parts)
                }
            }
            "exists" => {
                let v = self.var()?;
                Formula::exists(v, self.formula()?)
            }
            "forall" => {
                let v = self.var()?;
                Formula::forall(v, self.formula()?)
            }
            rel => {
                if let Some(name) = rel.strip_prefix('!') {
                    if name.is_empty() {
                        return self.err("expected relation name after '!'");
                    }
                    Formula::NegRel(name.to_string(), self.var_list()?)
                } else {
                    Formula::Rel(rel.to_string(), self.var_list()?)
                }
            }
        };
        self.expect(b')')?;
        Ok(f)
    }
}

/// Parse the s-expression formula syntax; inverse of `Display`.
pub fn parse_formula(text: &str) -> Result<Formula, LogicError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let f = p.formula()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing input after formula");
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Configuration for the grammar-directed random walk. The weights are the
/// fixed sampler configuration; samples are deterministic in the seed.
#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    pub max_rank: usize,
    pub max_vars: usize,
    pub fragment: FragmentTag,
}

fn sample_one(sig: &Signature, cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> Formula {
    let mut scope: Vec<Var> = (0..cfg.max_vars.max(1)).collect();
    gen_node(sig, cfg, cfg.max_rank, &mut scope, rng)
}

fn gen_node(
    sig: &Signature,
    cfg: &SamplerConfig,
    rank_budget: usize,
    scope: &mut Vec<Var>,
    rng: &mut ChaCha8Rng,
) -> Formula {
    // Leaning on atoms keeps formula size tame at desk scale.
    let roll: f64 = rng.gen();
    let quantifiers_ok = rank_budget > 0;
    if !quantifiers_ok || roll < 0.40 {
        return gen_atom(sig, cfg, scope, rng);
    }
    if roll < 0.55 || (cfg.fragment == FragmentTag::FullFo && roll < 0.60) {
        if cfg.fragment == FragmentTag::FullFo && roll >= 0.55 {
            return Formula::Not(Box::new(gen_node(sig, cfg, rank_budget, scope, rng)));
        }
        let width = rng.gen_range(2..=3);
        let parts = (0..width)
            .map(|_| gen_node(sig, cfg, rank_budget, scope, rng))
            .collect();
        return Formula::And(parts);
    }
    if roll < 0.75 {
        let width = rng.gen_range(2..=3);
        let parts = (0..width)
            .map(|_| gen_node(sig, cfg, rank_budget, scope, rng))
            .collect();
        return Formula::Or(parts);
    }
    let fresh = cfg.max_vars.max(1) + (cfg.max_rank - rank_budget);
    scope.push(fresh);
    let body = gen_node(sig, cfg, rank_budget - 1, scope, rng);
    scope.pop();
    if roll < 0.90 {
        Formula::exists(fresh, body)
    } else {
        Formula::forall(fresh, body)
    }
}

fn gen_atom(
    sig: &Signature,
    cfg: &SamplerConfig,
    scope: &[Var],
    rng: &mut ChaCha8Rng,
) -> Formula {
    let pick = |rng: &mut ChaCha8Rng| scope[rng.gen_range(0..scope.len())];
    let relational = !sig.is_empty() && rng.gen_bool(0.6);
    if relational {
        let rel = rng.gen_range(0..sig.len());
        let vars: Vec<Var> = (0..sig.arity(rel)).map(|_| pick(rng)).collect();
        let name = sig.name(rel).to_string();
        let negated = match cfg.fragment {
            FragmentTag::Positive => false,
            FragmentTag::Negative => true,
            FragmentTag::FullFo => rng.gen_bool(0.5),
        };
        if negated {
            Formula::NegRel(name, vars)
        } else {
            Formula::Rel(name, vars)
        }
    } else if rng.gen_bool(0.5) {
        Formula::Eq(pick(rng), pick(rng))
    } else {
        Formula::Neq(pick(rng), pick(rng))
    }
}

/// `count` formulas in the requested fragment with quantifier rank at most
/// `cfg.max_rank`, free variables among `v0..v{max_vars-1}`, deterministic
/// in `seed`.
pub fn sample_formulas(
    sig: &Signature,
    cfg: SamplerConfig,
    count: usize,
    seed: u64,
) -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_one(sig, &cfg, &mut rng)).collect()
}

/// Random R-positive formulas with rank at most `max_rank` and free
/// variables among `v0..v{max_vars-1}`.
pub fn sample_positive_formulas(
    sig: &Signature,
    max_rank: usize,
    max_vars: usize,
    count: usize,
    seed: u64,
) -> Vec<Formula> {
    sample_formulas(
        sig,
        SamplerConfig {
            max_rank,
            max_vars,
            fragment: FragmentTag::Positive,
        },
        count,
        seed,
    )
}

/// Random sentences in the requested fragment with quantifier rank at most
/// `max_rank` after free variables are closed existentially.
pub fn sample_sentences(
    sig: &Signature,
    fragment: FragmentTag,
    max_rank: usize,
    max_vars: usize,
    count: usize,
    seed: u64,
) -> Vec<Formula> {
    let max_vars = max_vars.max(1).min(max_rank.max(1));
    let body_rank = max_rank.saturating_sub(max_vars);
    sample_formulas(
        sig,
        SamplerConfig {
            max_rank: body_rank,
            max_vars,
            fragment,
        },
        count,
        seed,
    )
    .into_iter()
    .map(Formula::close_existentially)
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::parse_structure;

    fn a2() -> FiniteStructure {
        parse_structure(r#"{"sig":[["R",2]],"n":2,"rels":{"R":[[0,0],[1,1]]}}"#).unwrap()
    }

    fn b2() -> FiniteStructure {
        parse_structure(r#"{"sig":[["R",2]],"n":2,"rels":{"R":[[0,0],[0,1],[1,0],[1,1]]}}"#)
            .unwrap()
    }

    /// ∃v0 ∃v1 (v0 ≠ v1 ∧ R(v0,v1))
    fn off_diagonal_edge() -> Formula {
        parse_formula("(exists 0 (exists 1 (and (!= 0 1) (R 0 1))))").unwrap()
    }

    #[test]
    fn fragment_tags() {
        assert_eq!(fragment_of(&off_diagonal_edge()), FragmentTag::Positive);
        let neg = parse_formula("(forall 0 (!R 0 0))").unwrap();
        assert_eq!(fragment_of(&neg), FragmentTag::Negative);
        let full = parse_formula("(not (exists 0 (R 0 0)))").unwrap();
        assert_eq!(fragment_of(&full), FragmentTag::FullFo);
        // Its dual lives in the negative fragment.
        assert_eq!(
            fragment_of(&parse_formula("(forall 0 (!R 0 0))").unwrap()),
            FragmentTag::Negative
        );
    }

    #[test]
    fn quantifier_ranks() {
        assert_eq!(quantifier_rank(&parse_formula("(R 0 1)").unwrap()), 0);
        assert_eq!(
            quantifier_rank(&parse_formula("(exists 1 (R 0 1))").unwrap()),
            1
        );
        assert_eq!(
            quantifier_rank(
                &parse_formula("(forall 0 (exists 1 (and (R 0 1) (= 0 0))))").unwrap()
            ),
            2
        );
    }

    #[test]
    fn model_check_against_direct_enumeration() {
        // Independent oracle: scan all off-diagonal pairs by hand.
        let witness = |s: &FiniteStructure| {
            let n = s.universe_size();
            (0..n).any(|a| (0..n).any(|b| a != b && s.has_tuple(0, &[a, b])))
        };
        let phi = off_diagonal_edge();
        assert!(witness(&b2()));
        assert!(!witness(&a2()));
        assert!(holds(&b2(), &phi).unwrap());
        assert!(!holds(&a2(), &phi).unwrap());

        let mut val = Valuation::new();
        val.insert(0, 0);
        assert!(model_check(&a2(), &Formula::tru(), &val).unwrap());
    }

    #[test]
    fn uncovered_variable_reported() {
        let f = parse_formula("(R 0 1)").unwrap();
        let err = holds(&a2(), &f).unwrap_err();
        assert!(matches!(err, LogicError::UncoveredVariable(_)));
    }

    #[test]
    fn neg_dual_clauses() {
        let r = parse_formula("(R 0 1)").unwrap();
        assert_eq!(neg_dual(&r), parse_formula("(!R 0 1)").unwrap());
        let ex = parse_formula("(exists 0 (R 0 0))").unwrap();
        assert_eq!(neg_dual(&ex), parse_formula("(forall 0 (!R 0 0))").unwrap());
        let not = Formula::Not(Box::new(r.clone()));
        assert_eq!(neg_dual(&not), r);
    }

    #[test]
    fn duality_and_involution_extensional() {
        use crate::structure::enumerate_all;
        let sig = Signature::binary("R");
        let formulas = sample_formulas(
            &sig,
            SamplerConfig {
                max_rank: 2,
                max_vars: 2,
                fragment: FragmentTag::FullFo,
            },
            40,
            11,
        );
        let mut structures: Vec<FiniteStructure> = Vec::new();
        for n in 0..=2 {
            structures.extend(enumerate_all(&sig, n));
        }
        for seed in 0..8 {
            structures.push(crate::structure::generate_random(&sig, 3, 0.4, seed));
            structures.push(crate::structure::generate_random(&sig, 4, 0.6, seed));
        }
        for f in &formulas {
            let dual = neg_dual(f);
            let dual2 = neg_dual(&dual);
            let fv = f.free_vars();
            for s in &structures {
                for val in valuations(&fv, s.universe_size()) {
                    if fv.is_empty() && s.universe_size() == 0 {
                        // fine: empty valuation covers sentences
                    }
                    let v = model_check(s, f, &val).unwrap();
                    assert_eq!(model_check(s, &dual, &val).unwrap(), !v);
                    assert_eq!(model_check(s, &dual2, &val).unwrap(), v);
                }
            }
        }
    }

    pub(crate) fn valuations(fv: &BTreeSet<Var>, n: usize) -> Vec<Valuation> {
        if fv.is_empty() {
            return vec![Valuation::new()];
        }
        if n == 0 {
            return Vec::new(); // no covering valuation exists
        }
        let vars: Vec<Var> = fv.iter().copied().collect();
        let mut out = Vec::new();
        let total = n.pow(vars.len() as u32);
        for mut code in 0..total {
            let mut val = Valuation::new();
            for &v in &vars {
                val.insert(v, code % n);
                code /= n;
            }
            out.push(val);
        }
        out
    }

    #[test]
    fn fragment_membership_flips_under_dual() {
        let sig = Signature::binary("R");
        for (seed, fragment) in [(3, FragmentTag::Positive), (4, FragmentTag::Negative)] {
            let formulas = sample_formulas(
                &sig,
                SamplerConfig {
                    max_rank: 2,
                    max_vars: 2,
                    fragment,
                },
                60,
                seed,
            );
            for f in formulas {
                match fragment {
                    FragmentTag::Positive => {
                        assert!(in_positive(&f));
                        assert!(in_negative(&neg_dual(&f)));
                    }
                    FragmentTag::Negative => {
                        assert!(in_negative(&f));
                        assert!(in_positive(&neg_dual(&f)));
                    }
                    FragmentTag::FullFo => unreachable!(),
                }
            }
        }
    }

    /// Positive formulas travel forward along total condensations: whenever
    /// the source satisfies one under a valuation, the image satisfies it
    /// under the mapped valuation.
    #[test]
    fn positive_formulas_are_monotone_under_condensations() {
        use crate::condensation::decide_condensable;
        use crate::corpus::constructed_condensable_pairs;
        use crate::structure::StructurePair;
        let sig = Signature::binary("R");
        let formulas = sample_positive_formulas(&sig, 2, 2, 60, 21);
        for (x, y) in constructed_condensable_pairs(&sig, 4, 12, 13) {
            let pair = StructurePair::new(&x, &y).unwrap();
            let witness = decide_condensable(pair)
                .witness()
                .cloned()
                .expect("constructed pairs are condensable");
            for f in &formulas {
                let fv = f.free_vars();
                for val in valuations(&fv, x.universe_size()) {
                    if !model_check(&x, f, &val).unwrap() {
                        continue;
                    }
                    let mapped: Valuation =
                        val.iter().map(|(&v, &e)| (v, witness.map[e])).collect();
                    assert!(
                        model_check(&y, f, &mapped).unwrap(),
                        "positive formula {f} lost along a condensation"
                    );
                }
            }
        }
    }

    #[test]
    fn sampler_respects_rank_and_scope() {
        let sig = Signature::binary("R");
        let quantifier_free = sample_positive_formulas(&sig, 0, 2, 3, 5);
        assert_eq!(quantifier_free.len(), 3);
        for f in &quantifier_free {
            assert_eq!(quantifier_rank(f), 0);
            assert!(in_positive(f));
            assert!(f.free_vars().iter().all(|&v| v < 2));
        }
        let sentences = sample_sentences(&sig, FragmentTag::Positive, 2, 1, 1, 9);
        assert_eq!(sentences.len(), 1);
        for f in &sentences {
            assert!(f.free_vars().is_empty());
            assert!(quantifier_rank(f) <= 2);
            assert!(in_positive(f));
        }
        assert!(sample_positive_formulas(&sig, 1, 1, 0, 3).is_empty());
        // Determinism in the seed.
        assert_eq!(
            sample_positive_formulas(&sig, 2, 2, 10, 77),
            sample_positive_formulas(&sig, 2, 2, 10, 77)
        );
    }

    #[test]
    fn formula_text_round_trips() {
        for text in [
            "(= 0 1)",
            "(!= 2 3)",
            "(R 0 1)",
            "(!R 1 1)",
            "(not (R 0 0))",
            "(and (= 0 0) (or (R 0 1) (!R 1 0)))",
            "(exists 0 (forall 1 (R 0 1)))",
        ] {
            let f = parse_formula(text).unwrap();
            assert_eq!(f.to_string(), text);
            assert_eq!(parse_formula(&f.to_string()).unwrap(), f);
        }
        assert!(parse_formula("(and)").is_err());
        assert!(parse_formula("(R 0 1) junk").is_err());
        assert!(parse_formula("(exists x (R 0 0))").is_err());
    }
}
