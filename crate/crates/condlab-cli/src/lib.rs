//! Command implementations behind the `condlab` binary: parse inputs,
//! dispatch to the decision procedures, and assemble deterministic JSON
//! reports. Exit code 0 means a positive verdict, 1 a negative one, 2 a
//! usage or parse error.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use condlab::bfs::{maximal_bfs, reversibility_witness, SelfStructure};
use condlab::condensation::{
    decide_bicondensable, decide_condensable, BicondensabilityDecision, CondensationDecision,
};
use condlab::corpus::{mixed_exhaustive, random_tier};
use condlab::games::{
    compute_round_system, play_interactive, principal_spoiling_line, solve_full_game, solve_game,
    verify_round_levels, GameOutcome, Player,
};
use condlab::logic::holds;
use condlab::menagerie::{
    build_class_c, claim_condensation_builder, example_i_witnesses, ClassCSpec, ClassSizes, Level,
    RandomPosetOracle, SingletonBudget,
};
use condlab::structure::{parse_structure, FiniteStructure, Signature, StructurePair};

pub const EXIT_POSITIVE: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A run report: command echo, verdicts with witnesses or certificates, the
/// seed, and wall-clock timing. Everything except `timing_ms` is
/// deterministic under a fixed seed.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub verdict: bool,
    pub seed: u64,
    pub detail: Value,
    pub timing_ms: u128,
}

impl Report {
    pub fn print_human(&self) {
        println!(
            "{}: {}",
            self.command,
            if self.verdict { "positive" } else { "negative" }
        );
        println!("{}", serde_json::to_string_pretty(&self.detail).unwrap());
        println!("seed {}; {} ms", self.seed, self.timing_ms);
    }

    pub fn write_json(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    Cond,
    Bicond,
    Game(usize),
    Bfs,
    Rounds,
}

pub fn parse_mode(text: &str, rounds_flag: Option<usize>) -> Result<CheckMode, String> {
    match text {
        "cond" => Ok(CheckMode::Cond),
        "bicond" => Ok(CheckMode::Bicond),
        "bfs" => Ok(CheckMode::Bfs),
        "rounds" => Ok(CheckMode::Rounds),
        "game" => rounds_flag
            .map(CheckMode::Game)
            .ok_or_else(|| "mode 'game' needs --rounds N or the form game:N".to_string()),
        other => match other.strip_prefix("game:") {
            Some(n) => n
                .parse()
                .map(CheckMode::Game)
                .map_err(|_| format!("bad round count in {other:?}")),
            None => Err(format!(
                "unknown mode {other:?}; expected cond, bicond, game:N, bfs or rounds"
            )),
        },
    }
}

fn load_structure(path: &str) -> Result<FiniteStructure, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    parse_structure(&text).map_err(|e| format!("{path}: {e}"))
}

pub fn cmd_check(
    left_path: &str,
    right_path: &str,
    mode: CheckMode,
    seed: u64,
) -> Result<(Report, i32), String> {
    let start = Instant::now();
    let left = load_structure(left_path)?;
    let right = load_structure(right_path)?;
    let pair = StructurePair::new(&left, &right).map_err(|e| e.to_string())?;
    let (verdict, detail) = match mode {
        CheckMode::Cond => match decide_condensable(pair) {
            CondensationDecision::Condensable(w) => {
                (true, json!({ "mode": "cond", "witness": w.as_partial() }))
            }
            CondensationDecision::NotCondensable(c) => {
                (false, json!({ "mode": "cond", "certificate": c }))
            }
        },
        CheckMode::Bicond => match decide_bicondensable(pair) {
            BicondensabilityDecision::Yes { forward, backward } => (
                true,
                json!({ "mode": "bicond", "forward": forward.as_partial(),
                        "backward": backward.as_partial() }),
            ),
            BicondensabilityDecision::No {
                failing,
                certificate,
            } => (
                false,
                json!({ "mode": "bicond", "failing_direction": failing, "certificate": certificate }),
            ),
        },
        CheckMode::Game(n) => match solve_game(pair, n) {
            GameOutcome::IiWins(strategy) => (
                true,
                json!({ "mode": "game", "rounds": n, "winner": "II",
                        "strategy_positions": strategy.table_len() }),
            ),
            GameOutcome::IWins(spoiler) => {
                let line = principal_spoiling_line(pair, &spoiler);
                (
                    false,
                    json!({ "mode": "game", "rounds": n, "winner": "I", "spoiling_line": line }),
                )
            }
        },
        CheckMode::Bfs => match maximal_bfs(pair) {
            Some(system) => (
                true,
                json!({ "mode": "bfs", "members": system.len(),
                        "closed_under_restrictions": system.is_closed_under_restrictions() }),
            ),
            None => (false, json!({ "mode": "bfs", "members": 0 })),
        },
        CheckMode::Rounds => {
            let rs = compute_round_system(pair, None);
            let conditions_ok = verify_round_levels(
                &rs,
                left.universe_size(),
                right.universe_size(),
            )
            .is_ok();
            let sizes: Vec<usize> = rs.levels.iter().map(|l| l.len()).collect();
            (
                rs.verdict && conditions_ok,
                json!({ "mode": "rounds", "level_sizes": sizes,
                        "stabilization": rs.stabilization, "extension_conditions": conditions_ok }),
            )
        }
    };
    let report = Report {
        command: format!("check {left_path} {right_path}"),
        verdict,
        seed,
        detail,
        timing_ms: start.elapsed().as_millis(),
    };
    let code = if verdict { EXIT_POSITIVE } else { EXIT_NEGATIVE };
    Ok((report, code))
}

pub fn signature_preset(name: &str) -> Result<Signature, String> {
    match name {
        "r2" => Ok(Signature::binary("R")),
        "r2s1" => Signature::new(vec![("R", 2), ("S", 1)]).map_err(|e| e.to_string()),
        other => Err(format!("unknown signature preset {other:?} (try r2, r2s1)")),
    }
}

/// Cross-validate the four decision routes on an exhaustive-plus-sampled
/// corpus: the backtracking decision, the full-length game, the maximal
/// back-and-forth system and the round-system verdict must agree pairwise.
pub fn cmd_crossval(
    preset: &str,
    max_n: usize,
    seed: u64,
    pair_count: usize,
) -> Result<(Report, i32), String> {
    let start = Instant::now();
    let sig = signature_preset(preset)?;
    let mut pairs_checked = 0usize;
    let mut disagreements: Vec<Value> = Vec::new();
    let mut check = |pair: StructurePair<'_>, tier: &str, index: usize| {
        pairs_checked += 1;
        let decided = decide_condensable(pair).is_condensable();
        let game = solve_full_game(pair).ii_wins();
        let system = maximal_bfs(pair).is_some();
        let rounds = compute_round_system(pair, None).verdict;
        if decided != game || decided != system || decided != rounds {
            disagreements.push(json!({
                "tier": tier,
                "index": index,
                "left": pair.left().serialize(),
                "right": pair.right().serialize(),
                "decide": decided, "full_game": game, "bfs": system, "rounds": rounds,
            }));
        }
    };
    let tier = mixed_exhaustive(&sig, max_n.min(3), 1_000_000, 2_000, seed);
    for (index, &(i, j)) in tier.index_pairs.iter().enumerate() {
        let pair =
            StructurePair::new(&tier.structures[i], &tier.structures[j]).expect("one signature");
        check(pair, "exhaustive", index);
    }
    for n in 4..=max_n {
        for (index, (l, r)) in random_tier(&sig, n, pair_count, seed).iter().enumerate() {
            check(
                StructurePair::new(l, r).expect("one signature"),
                &format!("random-{n}"),
                index,
            );
        }
    }
    let verdict = disagreements.is_empty();
    let report = Report {
        command: format!("crossval --preset {preset} --max-n {max_n} --pair-count {pair_count}"),
        verdict,
        seed,
        detail: json!({
            "pairs_checked": pairs_checked,
            "disagreements": disagreements,
        }),
        timing_ms: start.elapsed().as_millis(),
    };
    let code = if verdict { EXIT_POSITIVE } else { EXIT_NEGATIVE };
    Ok((report, code))
}

pub fn cmd_demo(name: &str, budget: usize, seed: u64) -> Result<(Report, i32), String> {
    let start = Instant::now();
    let (verdict, detail) = match name {
        "random-poset-nonrev" => {
            let mut oracle = RandomPosetOracle::new(seed);
            let bad = oracle.bootstrap_bad_pair();
            let evidence = reversibility_witness(SelfStructure::Lazy(&mut oracle), &bad, budget)
                .map_err(|e| e.to_string())?;
            let mut histogram = [0usize; 4];
            for step in &evidence.steps {
                histogram[step.case.index() - 1] += 1;
            }
            (
                true,
                json!({
                    "demo": name,
                    "steps": evidence.steps.len(),
                    "case_histogram": { "between": histogram[0], "below_only": histogram[1],
                                         "above_only": histogram[2], "incomparable": histogram[3] },
                    "evidence": evidence.to_json(),
                }),
            )
        }
        "classC" => {
            let all_finite = ClassCSpec {
                singletons: SingletonBudget::Omega,
                finite_class_sizes: ClassSizes::AllFrom(2),
                infinite_classes: 0,
            };
            let one_infinite = ClassCSpec {
                singletons: SingletonBudget::Omega,
                finite_class_sizes: ClassSizes::Explicit(vec![]),
                infinite_classes: 1,
            };
            let prefix = claim_condensation_builder(&all_finite, &one_infinite, budget)
                .map_err(|e| e.to_string())?;
            (
                true,
                json!({
                    "demo": name,
                    "pairs": prefix.pairs,
                    "left_explored": prefix.left_prefix.universe_size(),
                    "right_explored": prefix.right_prefix.universe_size(),
                    "via_infinite_class": prefix.via_infinite_class,
                }),
            )
        }
        "example-I" => {
            let ex = example_i_witnesses(4).map_err(|e| e.to_string())?;
            let checks = [
                ("left_refutes_phi", !holds(&ex.left, &ex.phi).unwrap()),
                ("right_satisfies_phi", holds(&ex.right, &ex.phi).unwrap()),
                ("left_satisfies_psi", holds(&ex.left, &ex.psi).unwrap()),
                ("right_refutes_psi", !holds(&ex.right, &ex.psi).unwrap()),
            ];
            let all = checks.iter().all(|&(_, ok)| ok);
            (
                all,
                json!({
                    "demo": name,
                    "phi": ex.phi.to_string(),
                    "psi": ex.psi.to_string(),
                    "verdicts": checks.iter().map(|&(k, v)| json!({k: v})).collect::<Vec<_>>(),
                }),
            )
        }
        other => return Err(format!("unknown demo {other:?}")),
    };
    let report = Report {
        command: format!("demo {name} --budget {budget}"),
        verdict,
        seed,
        detail,
        timing_ms: start.elapsed().as_millis(),
    };
    let code = if verdict { EXIT_POSITIVE } else { EXIT_NEGATIVE };
    Ok((report, code))
}

/// Emit a named preset structure as a JSON document.
pub fn cmd_preset(name: &str, level: usize, seed: u64) -> Result<String, String> {
    let s = match name {
        "classC-fin" => build_class_c(
            &ClassCSpec {
                singletons: SingletonBudget::Omega,
                finite_class_sizes: ClassSizes::AllFrom(2),
                infinite_classes: 0,
            },
            Level::At(level),
        )
        .map_err(|e| e.to_string())?,
        "classC-omega" => build_class_c(
            &ClassCSpec {
                singletons: SingletonBudget::Omega,
                finite_class_sizes: ClassSizes::Explicit(vec![]),
                infinite_classes: 1,
            },
            Level::At(level),
        )
        .map_err(|e| e.to_string())?,
        "random-poset" => {
            let mut oracle = RandomPosetOracle::new(seed);
            oracle.grow(level);
            oracle.structure().clone()
        }
        "example-I" => {
            let ex = example_i_witnesses(level.max(4)).map_err(|e| e.to_string())?;
            return Ok(format!(
                "{}\n{}",
                ex.left.serialize(),
                ex.right.serialize()
            ));
        }
        other => {
            return Err(format!(
                "unknown preset {other:?} (try classC-fin, classC-omega, random-poset, example-I)"
            ))
        }
    };
    Ok(s.serialize())
}


pub fn cmd_play(
    left_path: &str,
    right_path: &str,
    rounds: usize,
    side: Player,
) -> Result<i32, String> {
    let left = load_structure(left_path)?;
    let right = load_structure(right_path)?;
    let pair = StructurePair::new(&left, &right).map_err(|e| e.to_string())?;
    let stdin = std::io::stdin();
    let mut input = stdin.lock();
    let mut output = std::io::stdout();
    play_interactive(pair, rounds, side, &mut input, &mut output)
        .map_err(|e| e.to_string())?;
    Ok(EXIT_POSITIVE)
}
