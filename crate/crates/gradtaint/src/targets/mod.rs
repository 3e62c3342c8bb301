//! Benchmark target programs.
//!
//! Each target is a micro-IR program that parses a small synthetic input
//! format, together with a canonical seed input that satisfies every check,
//! and a set of ground-truth byte ranges. A byte belongs to the ground truth
//! exactly when some single-byte change to the seed flips at least one sink
//! outcome; every byte outside the ranges is inert at the seed. That makes
//! the ranges checkable by brute force, which the tests below do.
//!
//! The parsers are written the way naive format parsers tend to be written,
//! on purpose: computed table offsets, string comparisons through an opaque
//! helper, control-dependent flag assignments, and rolling accumulators that
//! drag stale bytes along in a shift register. Each of those is a well-known
//! blind spot for rule-based taint propagation, and the roster exists so the
//! two flow detectors can be scored against the same oracle.
//!
//! Sink identifiers are stable strings (`"elf.magic0"`, `"zip.dist.13"`);
//! declaration order groups sinks by parse stage so that a truncated parse
//! reaches a prefix of the sink list wherever the format allows it.

mod elf;
mod jpg;
mod small;
mod xml;
mod zip;

use crate::error::{Error, Result};
use crate::ir::{BinOp, ExecutionTrace, ExtFn, Label, MicroProgram, Operand, Pred, ProgramBuilder, RegId, SinkId, Vm};

/// Half-open byte range `[start, end)` of ground-truth hot bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GtRange {
    pub start: usize,
    pub end: usize,
    pub label: &'static str,
}

/// A benchmark program plus its seed input and ground-truth annotation.
pub struct Target {
    pub program: MicroProgram,
    pub seed: Vec<u8>,
    pub ground_truth: Vec<GtRange>,
}

impl Target {
    pub fn name(&self) -> &str {
        &self.program.name
    }

    pub fn input_len(&self) -> usize {
        self.program.input_len
    }

    /// Runs the target on `input` with a fresh VM. Hot paths should reuse a
    /// [`Vm`] directly instead.
    pub fn run(&self, input: &[u8]) -> Result<ExecutionTrace> {
        Vm::new().run(&self.program, input)
    }

    /// Boolean mask over input bytes: `true` for ground-truth bytes.
    pub fn ground_truth_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.input_len()];
        for r in &self.ground_truth {
            for slot in &mut mask[r.start..r.end] {
                *slot = true;
            }
        }
        mask
    }

    pub fn ground_truth_byte_count(&self) -> usize {
        self.ground_truth_mask().iter().filter(|&&b| b).count()
    }
}

/// Names of all shipped targets, in roster order.
pub const TARGET_NAMES: [&str; 6] = ["toy-elf", "toy-zip", "toy-xml", "toy-jpg", "vuln-len", "compose"];

/// The four format parsers used for flow-detection comparisons.
pub const FLOW_SUITE: [&str; 4] = ["toy-elf", "toy-zip", "toy-xml", "toy-jpg"];

/// Sink singled out for the shift-register overtaint comparison.
pub const ZIP_SHIFT_SINK: &str = "zip.dist.13";

/// Sink singled out for the implicit-flow comparison.
pub const XML_CLOSING_SINK: &str = "xml.slot1.closing";

/// Builds a target by name.
pub fn build_target(name: &str) -> Result<Target> {
    match name {
        "toy-elf" => Ok(elf::build()),
        "toy-zip" => Ok(zip::build()),
        "toy-xml" => Ok(xml::build()),
        "toy-jpg" => Ok(jpg::build()),
        "vuln-len" => Ok(small::build_vuln_len()),
        "compose" => Ok(small::build_compose()),
        other => Err(Error::contract(format!("unknown target '{other}'"))),
    }
}

/// Builds every shipped target.
pub fn all_targets() -> Vec<Target> {
    TARGET_NAMES.iter().map(|n| build_target(n).expect("roster name")).collect()
}

/// Writes the ground-truth table for all targets as CSV
/// (`target,start,end,label` with half-open ranges).
pub fn ground_truth_csv() -> String {
    let mut out = String::from("target,start,end,label\n");
    for t in all_targets() {
        for r in &t.ground_truth {
            out.push_str(&format!("{},{},{},{}\n", t.name(), r.start, r.end, r.label));
        }
    }
    out
}

/// Deterministic filler for seed regions that carry no structure. The
/// pattern avoids 0x00 and 0xff runs so uninitialized-looking regions still
/// exercise the byte range.
pub(crate) fn patterned(len: usize, salt: u8) -> Vec<u8> {
    (0..len).map(|i| (i.wrapping_mul(167).wrapping_add(13) as u8) ^ salt).collect()
}

/// Small assembler wrapper shared by the target constructors: tracks an END
/// label every gate can bail to, and provides field-level idioms (load a
/// header byte, check it against a constant, pack a string for comparison).
pub(crate) struct Asm {
    pub b: ProgramBuilder,
    pub end: Label,
}

impl Asm {
    pub fn new(name: &str, input_len: usize) -> Asm {
        let mut b = ProgramBuilder::new(name, input_len);
        let end = b.label();
        Asm { b, end }
    }

    /// Loads the input byte at a fixed offset.
    pub fn load(&mut self, off: u64) -> RegId {
        let r = self.b.reg();
        self.b.load_input(r, off);
        r
    }

    /// Loads the input byte at a computed offset held in `idx`.
    pub fn load_at(&mut self, idx: RegId) -> RegId {
        let r = self.b.reg();
        self.b.load_input(r, idx);
        r
    }

    /// Loads a little-endian u16 from two adjacent input bytes.
    pub fn u16le(&mut self, off: u64) -> RegId {
        let lo = self.load(off);
        let hi = self.load(off + 1);
        let r = self.b.reg();
        self.b.bin(BinOp::Shl, r, hi, 8u64);
        self.b.bin(BinOp::Or, r, r, lo);
        r
    }

    /// Loads a big-endian u16 from two adjacent input bytes.
    pub fn u16be(&mut self, off: u64) -> RegId {
        let hi = self.load(off);
        let lo = self.load(off + 1);
        let r = self.b.reg();
        self.b.bin(BinOp::Shl, r, hi, 8u64);
        self.b.bin(BinOp::Or, r, r, lo);
        r
    }

    /// Records a branch sink without gating: both arms fall through.
    pub fn check(&mut self, id: &str, pred: Pred, a: impl Into<Operand>, bx: impl Into<Operand>) -> SinkId {
        let s = self.b.branch_sink(id, pred);
        self.b.check(pred, a, bx, s);
        s
    }

    /// Records a branch sink that also gates: a false outcome jumps to END.
    pub fn gate(&mut self, id: &str, pred: Pred, a: impl Into<Operand>, bx: impl Into<Operand>) -> SinkId {
        let s = self.b.branch_sink(id, pred);
        self.b.gate(pred, a, bx, s, self.end);
        s
    }

    /// Records a branch sink whose false outcome jumps to `on_fail`.
    pub fn gate_to(&mut self, id: &str, pred: Pred, a: impl Into<Operand>, bx: impl Into<Operand>, on_fail: Label) -> SinkId {
        let s = self.b.branch_sink(id, pred);
        self.b.gate(pred, a, bx, s, on_fail);
        s
    }

    /// Sinkless control gate: jumps to END when the predicate is false.
    pub fn require(&mut self, pred: Pred, a: impl Into<Operand>, bx: impl Into<Operand>) {
        let ok = self.b.label();
        self.b.cmp_branch(pred, a, bx, None, ok, self.end);
        self.b.place(ok);
    }

    /// Loads `count` bytes at fixed offsets `start..` and packs them
    /// big-endian into one register (first byte in the highest position).
    pub fn pack_bytes(&mut self, start: u64, count: usize) -> RegId {
        assert!((1..=8).contains(&count));
        let acc = self.load(start);
        for k in 1..count {
            let nb = self.load(start + k as u64);
            self.b.bin(BinOp::Shl, acc, acc, 8u64);
            self.b.bin(BinOp::Or, acc, acc, nb);
        }
        acc
    }

    /// Same packing as [`Asm::pack_bytes`] but from a computed base offset.
    pub fn pack_bytes_at(&mut self, base: RegId, count: usize) -> RegId {
        assert!((1..=8).contains(&count));
        let idx = self.b.reg();
        self.b.bin(BinOp::Add, idx, base, 0u64);
        let acc = self.load_at(idx);
        for _ in 1..count {
            self.b.bin(BinOp::Add, idx, idx, 1u64);
            let nb = self.load_at(idx);
            self.b.bin(BinOp::Shl, acc, acc, 8u64);
            self.b.bin(BinOp::Or, acc, acc, nb);
        }
        acc
    }

    /// Packs a byte-string constant the same way [`Asm::pack_bytes`] does.
    pub fn pack_const(s: &[u8]) -> u64 {
        assert!((1..=8).contains(&s.len()));
        s.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b))
    }

    /// Branch sink on `strcmp(packed, expect) == 0`.
    pub fn strcmp_check(&mut self, id: &str, packed: RegId, expect: u64) -> SinkId {
        let cr = self.b.reg();
        self.b.call_ext(ExtFn::Strcmp, packed, expect, cr);
        self.check(id, Pred::Eq, cr, 0u64)
    }

    /// Places END and finalizes. Every target ends with `END: halt`.
    pub fn finish(mut self) -> MicroProgram {
        self.b.place(self.end);
        self.b.halt();
        self.b.finish().expect("target program must link")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{SinkKind, SinkValue};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Outcome of one sink normalized to a bit: branch sinks take their
    /// predicate value, unreached sinks count as 0, scalar sinks are
    /// compared raw.
    fn branch_bit(prog: &MicroProgram, trace: &ExecutionTrace, idx: usize) -> bool {
        match prog.sinks[idx].kind {
            SinkKind::Branch(p) => SinkValue::branch_outcome(p, trace.sink_values[idx]),
            SinkKind::Scalar => unreachable!("branch_bit on scalar sink"),
        }
    }

    /// Mirrors the corpus generator's `random_flip` mutation: 1..=8 byte
    /// positions set to fresh uniform values.
    fn random_flip(seed: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
        let mut input = seed.to_vec();
        let flips = rng.gen_range(1..=8usize);
        for _ in 0..flips {
            let pos = rng.gen_range(0..input.len());
            let old = input[pos];
            loop {
                let v: u8 = rng.gen();
                if v != old {
                    input[pos] = v;
                    break;
                }
            }
        }
        input
    }

    #[test]
    fn roster_builds_and_names_match() {
        for name in TARGET_NAMES {
            let t = build_target(name).unwrap();
            assert_eq!(t.name(), name);
            assert_eq!(t.seed.len(), t.input_len());
            assert!(!t.ground_truth.is_empty());
        }
        assert!(build_target("toy-pdf").is_err());
    }

    #[test]
    fn parser_targets_have_about_fifty_sinks_and_five_percent_ground_truth() {
        for name in FLOW_SUITE {
            let t = build_target(name).unwrap();
            let n = t.program.sinks.len();
            assert!((50..=54).contains(&n), "{name}: {n} sinks");
            let frac = t.ground_truth_byte_count() as f64 / t.input_len() as f64;
            assert!((0.045..=0.065).contains(&frac), "{name}: gt fraction {frac:.4}");
        }
    }

    #[test]
    fn seed_reaches_every_sink_and_satisfies_every_branch() {
        for t in all_targets() {
            let trace = t.run(&t.seed).unwrap();
            for (i, decl) in t.program.sinks.iter().enumerate() {
                assert!(
                    trace.sink_values[i].is_some(),
                    "{}: sink {} unreached at seed",
                    t.name(),
                    decl.id
                );
                if matches!(decl.kind, SinkKind::Branch(_)) {
                    assert!(
                        branch_bit(&t.program, &trace, i),
                        "{}: sink {} false at seed",
                        t.name(),
                        decl.id
                    );
                }
            }
        }
    }

    #[test]
    fn ground_truth_ranges_are_sorted_and_disjoint() {
        for t in all_targets() {
            let mut prev_end = 0usize;
            for r in &t.ground_truth {
                assert!(r.start < r.end, "{}: empty range {}", t.name(), r.label);
                assert!(r.start >= prev_end, "{}: overlapping/unsorted range {}", t.name(), r.label);
                assert!(r.end <= t.input_len());
                prev_end = r.end;
            }
        }
    }

    /// Brute-force oracle at the seed: a byte is influential iff some value
    /// for it changes some sink outcome (branch bit, scalar value, or
    /// reachability). Ground truth must match exactly — every in-range byte
    /// influential, every out-of-range byte inert.
    #[test]
    fn ground_truth_agrees_with_exhaustive_seed_sweep() {
        for t in all_targets() {
            let mask = t.ground_truth_mask();
            let base = t.run(&t.seed).unwrap();
            let mut vm = Vm::new();
            let mut input = t.seed.clone();
            for j in 0..t.input_len() {
                let orig = input[j];
                let mut influential = false;
                for v in 0..=255u8 {
                    if v == orig {
                        continue;
                    }
                    input[j] = v;
                    let vals = vm.run_sinks(&t.program, &input).unwrap();
                    for (i, decl) in t.program.sinks.iter().enumerate() {
                        let changed = match decl.kind {
                            SinkKind::Branch(p) => {
                                SinkValue::branch_outcome(p, vals[i])
                                    != SinkValue::branch_outcome(p, base.sink_values[i])
                            }
                            SinkKind::Scalar => vals[i] != base.sink_values[i],
                        };
                        if changed {
                            influential = true;
                            break;
                        }
                    }
                    if influential {
                        break;
                    }
                }
                input[j] = orig;
                assert_eq!(
                    influential,
                    mask[j],
                    "{}: byte {j} influential={influential} but ground-truth={}",
                    t.name(),
                    mask[j]
                );
            }
        }
    }

    /// 6000 random single-byte flips of the seed must exercise both
    /// outcomes of every branch sink (an unreached sink counts as 0).
    #[test]
    fn six_thousand_flips_cover_both_outcomes_of_every_branch_sink() {
        for t in all_targets() {
            let branch_idx: Vec<usize> = t
                .program
                .sinks
                .iter()
                .enumerate()
                .filter(|(_, d)| matches!(d.kind, SinkKind::Branch(_)))
                .map(|(i, _)| i)
                .collect();
            if branch_idx.is_empty() {
                continue;
            }
            let mut seen_true = vec![false; t.program.sinks.len()];
            let mut seen_false = vec![false; t.program.sinks.len()];
            let mut vm = Vm::new();
            let mut rng = ChaCha8Rng::seed_from_u64(0xd1ce);
            let mut record = |prog: &MicroProgram, vals: &[Option<SinkValue>]| {
                for &i in &branch_idx {
                    let p = match prog.sinks[i].kind {
                        SinkKind::Branch(p) => p,
                        SinkKind::Scalar => unreachable!(),
                    };
                    if SinkValue::branch_outcome(p, vals[i]) {
                        seen_true[i] = true;
                    } else {
                        seen_false[i] = true;
                    }
                }
            };
            let seed_vals = vm.run_sinks(&t.program, &t.seed).unwrap().to_vec();
            record(&t.program, &seed_vals);
            for _ in 0..6000 {
                let input = random_flip(&t.seed, &mut rng);
                let vals = vm.run_sinks(&t.program, &input).unwrap().to_vec();
                record(&t.program, &vals);
            }
            for &i in &branch_idx {
                assert!(
                    seen_true[i] && seen_false[i],
                    "{}: sink {} outcomes not covered (true={}, false={})",
                    t.name(),
                    t.program.sinks[i].id,
                    seen_true[i],
                    seen_false[i]
                );
            }
        }
    }

    #[test]
    fn sink_ids_are_unique_and_stage_ordered() {
        for t in all_targets() {
            let ids: Vec<&str> = t.program.sinks.iter().map(|d| d.id.as_str()).collect();
            let mut dedup = ids.clone();
            dedup.sort_unstable();
            dedup.dedup();
            assert_eq!(dedup.len(), ids.len(), "{}: duplicate sink ids", t.name());
        }
    }

    /// toy-elf aborts to END at every gate, so the reached sinks always form
    /// a prefix of the declaration order. This is what makes coverage
    /// stratification by "first k sinks" meaningful.
    #[test]
    fn elf_reached_sinks_form_a_prefix_under_random_mutation() {
        let t = build_target("toy-elf").unwrap();
        let mut vm = Vm::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for round in 0..400 {
            let mut input = t.seed.clone();
            for _ in 0..(1 + round % 5) {
                let pos = rng.gen_range(0..input.len());
                input[pos] = rng.gen();
            }
            let vals = vm.run_sinks(&t.program, &input).unwrap();
            let mut seen_gap = false;
            for v in vals.iter() {
                if v.is_none() {
                    seen_gap = true;
                } else {
                    assert!(!seen_gap, "toy-elf: reached sink after an unreached one");
                }
            }
        }
    }

    #[test]
    fn zip_decode_sinks_are_reached_on_every_input() {
        let t = build_target("toy-zip").unwrap();
        let mut vm = Vm::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let input: Vec<u8> = (0..t.input_len()).map(|_| rng.gen()).collect();
            let vals = vm.run_sinks(&t.program, &input).unwrap();
            for (i, decl) in t.program.sinks.iter().enumerate() {
                if decl.id.starts_with("zip.dist.") {
                    assert!(vals[i].is_some(), "zip decode sink {} unreached", decl.id);
                }
            }
        }
    }

    #[test]
    fn ground_truth_csv_lists_every_target() {
        let csv = ground_truth_csv();
        for name in TARGET_NAMES {
            assert!(csv.contains(name), "missing {name} in gt csv");
        }
        assert!(csv.starts_with("target,start,end,label\n"));
    }
}
