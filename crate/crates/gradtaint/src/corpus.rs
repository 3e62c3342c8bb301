//! Training-corpus generation: mutate a seed input, execute the target,
//! and assemble trace datasets.
//!
//! Two strategies. `random_flip` mutates the canonical seed independently
//! per sample: 1 to `flip_max` distinct byte positions, each XORed with a
//! nonzero value so every mutant differs from the seed. `coverage_guided`
//! runs a minimal greedy fuzzing loop: mutants that traverse a
//! control-flow edge not seen before are retained as future mutation
//! bases, so later mutants stack changes instead of always restarting at
//! the seed. Both are fully deterministic per RNG seed — the reproducy
//! contract is byte-identical dataset files.
//!
//! [`stratify_by_sink_coverage`] carves a dataset into nested subsets by
//! how deep into the (fixed) sink order each sample's execution got,
//! which drives the training-coverage sweep.

use crate::embedding::{SinkSpec, TraceDataset};
use crate::error::{Error, Result};
use crate::ir::{MicroProgram, Vm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// Default upper bound on byte positions flipped per mutant. Small flip
/// counts keep mutants near the seed so branch sinks vary one at a time.
pub const DEFAULT_FLIP_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    RandomFlip,
    CoverageGuided,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Strategy> {
        match s {
            "random_flip" | "random-flip" => Some(Strategy::RandomFlip),
            "coverage_guided" | "coverage-guided" => Some(Strategy::CoverageGuided),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::RandomFlip => "random_flip",
            Strategy::CoverageGuided => "coverage_guided",
        }
    }
}

/// Pads with zeros or truncates so the input matches the target length.
pub fn fit_length(seed: &[u8], m: usize) -> Vec<u8> {
    let mut out = seed.to_vec();
    out.resize(m, 0);
    out
}

/// One mutant: 1..=`flip_max` distinct positions, each XORed with a
/// nonzero byte, so the result differs from `base` at every chosen spot.
fn mutate(rng: &mut ChaCha8Rng, base: &[u8], flip_max: usize) -> Vec<u8> {
    let m = base.len();
    let k = rng.gen_range(1..=flip_max.min(m).max(1));
    let mut input = base.to_vec();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    while chosen.len() < k {
        let pos = rng.gen_range(0..m);
        if !chosen.contains(&pos) {
            chosen.push(pos);
        }
    }
    for pos in chosen {
        input[pos] ^= rng.gen_range(1..=255u8);
    }
    input
}

/// Generates `count` mutants of `seed`, runs the target on each, and
/// returns the raw trace dataset. Deterministic per `rng_seed`.
pub fn generate_corpus(
    program: &MicroProgram,
    seed: &[u8],
    count: usize,
    rng_seed: u64,
    strategy: Strategy,
    flip_max: usize,
) -> Result<TraceDataset> {
    if count == 0 {
        return Err(Error::contract("corpus size must be at least 1"));
    }
    if flip_max == 0 {
        return Err(Error::contract("flip_max must be at least 1"));
    }
    let seed = fit_length(seed, program.input_len);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut ds = TraceDataset::new(program.input_len, SinkSpec::from_program(program))?;
    let mut vm = Vm::new();
    match strategy {
        Strategy::RandomFlip => {
            for _ in 0..count {
                let input = mutate(&mut rng, &seed, flip_max);
                let raw = vm.run_sinks(program, &input)?;
                ds.push_sample(input, raw)?;
            }
        }
        Strategy::CoverageGuided => {
            let seed_trace = vm.run(program, &seed)?;
            let mut covered: BTreeSet<(u32, u32)> = seed_trace.edges.iter().copied().collect();
            // Retained bases carry their own traversed-edge count and are
            // drawn with probability proportional to it: a crude analog of
            // a fuzzer's favored-queue scheduling. Uniform selection lets
            // early-aborting retainees starve the productive deep bases.
            let mut bases: Vec<(Vec<u8>, usize)> = vec![(seed, seed_trace.edges.len().max(1))];
            let mut total_weight = bases[0].1;
            for _ in 0..count {
                let mut roll = rng.gen_range(0..total_weight);
                let mut pick = bases.len() - 1;
                for (i, (_, w)) in bases.iter().enumerate() {
                    if roll < *w {
                        pick = i;
                        break;
                    }
                    roll -= w;
                }
                let input = mutate(&mut rng, &bases[pick].0, flip_max);
                let trace = vm.run(program, &input)?;
                let novel = trace.edges.iter().any(|e| !covered.contains(e));
                ds.push_sample(input.clone(), trace.sink_values)?;
                if novel {
                    covered.extend(trace.edges.iter().copied());
                    let weight = trace.edges.len().max(1);
                    total_weight += weight;
                    bases.push((input, weight));
                }
            }
        }
    }
    Ok(ds)
}

/// Union of control-flow edges over every input in the dataset, by replay.
pub fn edge_union(program: &MicroProgram, ds: &TraceDataset) -> Result<BTreeSet<(u32, u32)>> {
    let mut vm = Vm::new();
    let mut edges = BTreeSet::new();
    for row in 0..ds.len() {
        edges.extend(vm.run(program, ds.input(row))?.edges);
    }
    Ok(edges)
}

/// Highest sink index a sample's execution reached, if any.
fn deepest_sink(ds: &TraceDataset, row: usize) -> Option<usize> {
    (0..ds.sinks().len()).rev().find(|&i| ds.raw_sink(row, i).is_some())
}

/// Nested coverage subsets: subset `i` keeps exactly the samples whose
/// executions stay within the first `sink_counts[i]` sinks of the fixed
/// sink order. Errors if the dataset as a whole covers fewer sinks than
/// requested, or if any subset would be empty.
pub fn stratify_by_sink_coverage(
    ds: &TraceDataset,
    sink_counts: &[usize],
) -> Result<Vec<TraceDataset>> {
    if sink_counts.is_empty() || sink_counts.iter().any(|&c| c == 0) {
        return Err(Error::contract("sink counts must be positive"));
    }
    let n = ds.sinks().len();
    let covered: BTreeSet<usize> = (0..ds.len())
        .flat_map(|row| (0..n).filter(move |&i| ds.raw_sink(row, i).is_some()))
        .collect();
    let max_requested = *sink_counts.iter().max().expect("nonempty");
    if max_requested > covered.len() {
        return Err(Error::contract(format!(
            "requested coverage of {max_requested} sinks but the dataset reaches only {}",
            covered.len()
        )));
    }
    let mut out = Vec::with_capacity(sink_counts.len());
    for &c in sink_counts {
        let rows: Vec<usize> = (0..ds.len())
            .filter(|&row| deepest_sink(ds, row).is_none_or(|deep| deep < c))
            .collect();
        if rows.is_empty() {
            return Err(Error::contract(format!(
                "no sample stays within the first {c} sinks"
            )));
        }
        out.push(ds.subset(&rows)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::emit_dataset;
    use crate::ir::{SinkKind, SinkValue};
    use crate::targets::build_target;

    #[test]
    fn strategy_names_round_trip() {
        for s in [Strategy::RandomFlip, Strategy::CoverageGuided] {
            assert_eq!(Strategy::parse(s.name()), Some(s));
        }
        assert_eq!(Strategy::parse("afl"), None);
    }

    #[test]
    fn corpora_are_reproducible_per_seed() {
        let t = build_target("vuln-len").unwrap();
        for strategy in [Strategy::RandomFlip, Strategy::CoverageGuided] {
            let a = generate_corpus(&t.program, &t.seed, 60, 5, strategy, DEFAULT_FLIP_MAX).unwrap();
            let b = generate_corpus(&t.program, &t.seed, 60, 5, strategy, DEFAULT_FLIP_MAX).unwrap();
            assert_eq!(emit_dataset(&a), emit_dataset(&b), "{}", strategy.name());
            let c = generate_corpus(&t.program, &t.seed, 60, 6, strategy, DEFAULT_FLIP_MAX).unwrap();
            assert_ne!(emit_dataset(&a), emit_dataset(&c), "{}", strategy.name());
        }
    }

    #[test]
    fn every_mutant_differs_from_the_seed_within_flip_max() {
        let t = build_target("toy-xml").unwrap();
        let flip_max = 3;
        let ds = generate_corpus(&t.program, &t.seed, 40, 1, Strategy::RandomFlip, flip_max).unwrap();
        for row in 0..ds.len() {
            let input = ds.input(row);
            assert_eq!(input.len(), t.input_len());
            let dist = input.iter().zip(&t.seed).filter(|(a, b)| a != b).count();
            assert!(
                (1..=flip_max).contains(&dist),
                "mutant {row} at hamming distance {dist}"
            );
        }
    }

    #[test]
    fn wrong_length_seeds_are_padded_or_truncated() {
        let t = build_target("compose").unwrap();
        let short = generate_corpus(&t.program, &[7], 10, 2, Strategy::RandomFlip, 8).unwrap();
        let long = generate_corpus(&t.program, &[7; 99], 10, 2, Strategy::CoverageGuided, 8).unwrap();
        for row in 0..10 {
            assert_eq!(short.input(row).len(), 6);
            assert_eq!(long.input(row).len(), 6);
        }
        assert!(generate_corpus(&t.program, &t.seed, 0, 2, Strategy::RandomFlip, 8).is_err());
        assert!(generate_corpus(&t.program, &t.seed, 5, 2, Strategy::RandomFlip, 0).is_err());
    }

    /// Six thousand random flips of the canonical seed observe every
    /// branch sink in both outcomes.
    #[test]
    fn six_thousand_random_flips_cover_all_elf_sinks_both_ways() {
        let t = build_target("toy-elf").unwrap();
        let ds = generate_corpus(&t.program, &t.seed, 6000, 99, Strategy::RandomFlip, DEFAULT_FLIP_MAX)
            .unwrap();
        for (i, spec) in ds.sinks().iter().enumerate() {
            let SinkKind::Branch(pred) = spec.kind else { continue };
            let mut seen = [false; 2];
            for row in 0..ds.len() {
                let bit = SinkValue::branch_outcome(pred, ds.raw_sink(row, i));
                seen[usize::from(bit)] = true;
            }
            assert!(seen[0] && seen[1], "sink {} missed an outcome", spec.id);
        }
    }

    /// At equal count, the greedy corpus accumulates at least the random
    /// corpus's edges in the median seed, and strictly more overall.
    ///
    /// The comparison starts from a degraded seed (section count zeroed,
    /// locking the table-walk sinks behind a one-byte fix): a canonical
    /// full-path seed leaves coverage guidance nothing to discover, which
    /// is not the setting the strategy exists for. Random mutation must
    /// re-find the fix on every draw; the greedy loop retains it.
    #[test]
    fn coverage_guided_edges_contain_random_edges_at_the_median() {
        let t = build_target("toy-elf").unwrap();
        let mut seed_input = t.seed.clone();
        seed_input[0x0d] = 0; // shnum = 0: no section entry passes `i < shnum`
        let mut superset_runs = 0;
        let mut cov_sizes = Vec::new();
        let mut rand_sizes = Vec::new();
        for seed in 0..10u64 {
            let rand =
                generate_corpus(&t.program, &seed_input, 1500, seed, Strategy::RandomFlip, 8).unwrap();
            let cov =
                generate_corpus(&t.program, &seed_input, 1500, seed, Strategy::CoverageGuided, 8)
                    .unwrap();
            let rand_edges = edge_union(&t.program, &rand).unwrap();
            let cov_edges = edge_union(&t.program, &cov).unwrap();
            if rand_edges.is_subset(&cov_edges) {
                superset_runs += 1;
            }
            cov_sizes.push(cov_edges.len());
            rand_sizes.push(rand_edges.len());
        }
        assert!(
            superset_runs >= 5,
            "coverage corpus contained the random corpus's edges in only {superset_runs}/10 seeds"
        );
        cov_sizes.sort_unstable();
        rand_sizes.sort_unstable();
        assert!(
            cov_sizes[5] >= rand_sizes[5],
            "median edge count regressed: {cov_sizes:?} vs {rand_sizes:?}"
        );
    }

    #[test]
    fn stratified_subsets_are_nested_and_nonempty() {
        let t = build_target("toy-elf").unwrap();
        let ds = generate_corpus(&t.program, &t.seed, 2000, 17, Strategy::RandomFlip, DEFAULT_FLIP_MAX)
            .unwrap();
        let counts = [10usize, 20, 30, 40, 50];
        let strata = stratify_by_sink_coverage(&ds, &counts).unwrap();
        assert_eq!(strata.len(), 5);
        let mut prev = 0usize;
        for (stratum, &c) in strata.iter().zip(&counts) {
            assert!(!stratum.is_empty(), "stratum for {c} sinks is empty");
            assert!(stratum.len() >= prev, "strata must be nested");
            prev = stratum.len();
            for row in 0..stratum.len() {
                for i in c..stratum.sinks().len() {
                    assert!(
                        stratum.raw_sink(row, i).is_none(),
                        "sample reaches sink {i} beyond the first {c}"
                    );
                }
            }
        }
        // The full-count stratum is the whole dataset.
        assert_eq!(strata[4], ds);
    }

    #[test]
    fn stratify_rejects_uncovered_requests() {
        let t = build_target("vuln-len").unwrap();
        // A corpus of one unmutated-magic sample cannot cover 10 sinks.
        let ds = TraceDataset::collect(&t.program, vec![vec![0u8; 256]]).unwrap();
        assert!(stratify_by_sink_coverage(&ds, &[10]).is_err());
        assert!(stratify_by_sink_coverage(&ds, &[]).is_err());
        assert!(stratify_by_sink_coverage(&ds, &[0]).is_err());
    }
}
