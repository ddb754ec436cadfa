//! Corpus builders for the oracle-equivalence suites: exhaustive same-size
//! pair tiers with seeded down-sampling past a check budget, random pair
//! tiers for larger universes, and constructed condensable pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::structure::{enumerate_all, generate_random, FiniteStructure, Signature};

/// One same-size tier: the structure pool and the ordered index pairs to
/// check. When the full product exceeds `max_checks` the pairs are a seeded
/// sample of `sample_cap` entries; otherwise the tier is exhaustive.
pub struct PairTier {
    pub size: usize,
    pub structures: Vec<FiniteStructure>,
    pub index_pairs: Vec<(usize, usize)>,
    pub exhaustive: bool,
}

pub fn exhaustive_tier(
    sig: &Signature,
    size: usize,
    max_checks: usize,
    sample_cap: usize,
    seed: u64,
) -> PairTier {
    let structures: Vec<FiniteStructure> = enumerate_all(sig, size).collect();
    let total = structures.len() * structures.len();
    if total <= max_checks {
        let index_pairs = (0..structures.len())
            .flat_map(|i| (0..structures.len()).map(move |j| (i, j)))
            .collect();
        PairTier {
            size,
            structures,
            index_pairs,
            exhaustive: true,
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ size as u64);
        let index_pairs = (0..sample_cap)
            .map(|_| {
                (
                    rng.gen_range(0..structures.len()),
                    rng.gen_range(0..structures.len()),
                )
            })
            .collect();
        PairTier {
            size,
            structures,
            index_pairs,
            exhaustive: false,
        }
    }
}

/// Every structure of every size up to `max_size` in one pool, with the
/// ordered index pairs to check (cross-size pairs included). Past the check
/// budget the pairs are a seeded sample of `sample_cap` entries per size
/// step.
pub fn mixed_exhaustive(
    sig: &Signature,
    max_size: usize,
    max_checks: usize,
    sample_cap: usize,
    seed: u64,
) -> PairTier {
    let mut structures: Vec<FiniteStructure> = Vec::new();
    for n in 0..=max_size {
        structures.extend(enumerate_all(sig, n));
    }
    let total = structures.len() * structures.len();
    if total <= max_checks {
        let index_pairs = (0..structures.len())
            .flat_map(|i| (0..structures.len()).map(move |j| (i, j)))
            .collect();
        PairTier {
            size: max_size,
            structures,
            index_pairs,
            exhaustive: true,
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let index_pairs = (0..sample_cap * (max_size + 1))
            .map(|_| {
                (
                    rng.gen_range(0..structures.len()),
                    rng.gen_range(0..structures.len()),
                )
            })
            .collect();
        PairTier {
            size: max_size,
            structures,
            index_pairs,
            exhaustive: false,
        }
    }
}

/// A tier of random same-size pairs with densities drawn per structure.
pub fn random_tier(
    sig: &Signature,
    size: usize,
    pair_count: usize,
    seed: u64,
) -> Vec<(FiniteStructure, FiniteStructure)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (size as u64) << 8);
    (0..pair_count)
        .map(|_| {
            let dl: f64 = rng.gen();
            let dr: f64 = rng.gen();
            let sl = rng.gen::<u64>();
            let sr = rng.gen::<u64>();
            (
                generate_random(sig, size, dl, sl),
                generate_random(sig, size, dr, sr),
            )
        })
        .collect()
}

/// Pairs condensable by construction: the right structure is a relabeled
/// copy of the left with extra tuples sprinkled in, so the relabeling is a
/// bijective homomorphism.
pub fn constructed_condensable_pairs(
    sig: &Signature,
    size: usize,
    pair_count: usize,
    seed: u64,
) -> Vec<(FiniteStructure, FiniteStructure)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (size as u64) << 16);
    (0..pair_count)
        .map(|_| {
            let left = generate_random(sig, size, rng.gen_range(0.1..0.6), rng.gen());
            let mut relabel: Vec<usize> = (0..size).collect();
            for i in (1..size).rev() {
                relabel.swap(i, rng.gen_range(0..=i));
            }
            let mut right = FiniteStructure::empty(sig.clone(), size);
            for rel in 0..sig.len() {
                for t in left.tuples(rel) {
                    let image: Vec<usize> = t.iter().map(|&e| relabel[e]).collect();
                    right.insert_tuple(rel, image).expect("in range");
                }
                // Extra tuples only ever help the forward direction.
                for t in crate::structure::all_tuples(size, sig.arity(rel)) {
                    if rng.gen_bool(0.15) {
                        right.insert_tuple(rel, t).expect("in range");
                    }
                }
            }
            (left, right)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condensation::decide_condensable;
    use crate::structure::StructurePair;

    #[test]
    fn exhaustive_tier_respects_budget() {
        let sig = Signature::binary("R");
        let full = exhaustive_tier(&sig, 2, 1_000_000, 100, 7);
        assert!(full.exhaustive);
        assert_eq!(full.index_pairs.len(), 256);
        let sampled = exhaustive_tier(&sig, 2, 100, 50, 7);
        assert!(!sampled.exhaustive);
        assert_eq!(sampled.index_pairs.len(), 50);
        // Seeded: same corpus both times.
        let again = exhaustive_tier(&sig, 2, 100, 50, 7);
        assert_eq!(sampled.index_pairs, again.index_pairs);
    }

    #[test]
    fn constructed_pairs_are_condensable() {
        let sig = Signature::binary("R");
        for (l, r) in constructed_condensable_pairs(&sig, 4, 10, 1) {
            let pair = StructurePair::new(&l, &r).unwrap();
            assert!(decide_condensable(pair).is_condensable());
        }
    }
}
