//! Rule-based multi-tag dynamic taint analysis over the micro-IR.
//!
//! This is the classic propagation design: every value carries the set of
//! input byte indices it was derived from, sources are input reads, sinks
//! collect the union of their operands' tags. The rules are deliberately
//! the standard ones, including their known blind spots, because this
//! engine is the baseline the gradient-based detector is measured against:
//!
//! - every binary op unions both operands' tags; for shifts that includes
//!   the shift amount, so a rolling-accumulator decode loop smears tags
//!   from every byte it ever consumed onto later extractions (overtaint)
//! - memory and input reads take only the cell's tags; the address
//!   computation's tags are dropped, so table-driven decoding launders
//!   taint away (pointer undertaint)
//! - branch conditions do not taint the values assigned under them, so a
//!   flag set to a constant inside a guarded arm carries nothing
//!   (implicit-flow undertaint)
//! - external calls return untagged values (opaque-call undertaint)
//!
//! The tag interpreter executes the same value semantics as [`crate::ir::Vm`]
//! and follows the same concrete path; it only adds the tag lattice.

use crate::error::{Error, Result};
use crate::ir::{ExtFn, Instr, MicroProgram, Operand, SinkValue, DEFAULT_STEP_BUDGET};

/// Set of source byte indices, dense bitset over a fixed universe of
/// `universe` input bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    universe: usize,
    words: Vec<u64>,
}

impl TagSet {
    pub fn empty(universe: usize) -> TagSet {
        TagSet { universe, words: vec![0; universe.div_ceil(64)] }
    }

    pub fn singleton(universe: usize, index: usize) -> TagSet {
        let mut s = TagSet::empty(universe);
        s.insert(index);
        s
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn insert(&mut self, index: usize) {
        assert!(index < self.universe, "tag index outside universe");
        self.words[index / 64] |= 1u64 << (index % 64);
    }

    pub fn contains(&self, index: usize) -> bool {
        index < self.universe && self.words[index / 64] & (1u64 << (index % 64)) != 0
    }

    pub fn union_assign(&mut self, other: &TagSet) {
        debug_assert_eq!(self.universe, other.universe);
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter(move |b| w & (1u64 << b) != 0).map(move |b| wi * 64 + b)
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn is_subset(&self, other: &TagSet) -> bool {
        debug_assert_eq!(self.universe, other.universe);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }
}

impl FromIterator<usize> for TagSet {
    /// Builds from indices with the universe set to `max+1`; test helper,
    /// production paths size the universe from the program.
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> TagSet {
        let items: Vec<usize> = iter.into_iter().collect();
        let universe = items.iter().max().map_or(1, |m| m + 1);
        let mut s = TagSet::empty(universe);
        for i in items {
            s.insert(i);
        }
        s
    }
}

/// Result of one tag-propagating run.
#[derive(Debug, Clone)]
pub struct TaintOutcome {
    /// Per declared sink, the union of operand tags over every hit. A sink
    /// the run never reached has an empty set.
    pub sink_tags: Vec<TagSet>,
    /// Concrete sink values, first hit, as in a plain run.
    pub sink_values: Vec<Option<SinkValue>>,
    /// Final register tags.
    pub reg_tags: Vec<TagSet>,
    pub steps: u64,
}

/// Reusable tag interpreter; amortizes tag and value scratch across runs.
pub struct TaintVm {
    regs: Vec<u64>,
    reg_tags: Vec<TagSet>,
    mem: Vec<u8>,
    mem_tags: Vec<TagSet>,
    pub step_budget: u64,
}

impl Default for TaintVm {
    fn default() -> Self {
        TaintVm::new()
    }
}

impl TaintVm {
    pub fn new() -> TaintVm {
        TaintVm {
            regs: Vec::new(),
            reg_tags: Vec::new(),
            mem: Vec::new(),
            mem_tags: Vec::new(),
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }

    pub fn propagate(&mut self, prog: &MicroProgram, input: &[u8]) -> Result<TaintOutcome> {
        let m = prog.input_len;
        self.regs.clear();
        self.regs.resize(prog.reg_count, 0);
        self.mem.clear();
        self.mem.resize(prog.mem_size, 0);
        resize_tags(&mut self.reg_tags, prog.reg_count, m);
        resize_tags(&mut self.mem_tags, prog.mem_size, m);

        let mut sink_tags: Vec<TagSet> = (0..prog.sinks.len()).map(|_| TagSet::empty(m)).collect();
        let mut sink_seen = vec![false; prog.sinks.len()];
        let mut sink_vals: Vec<Option<SinkValue>> = vec![None; prog.sinks.len()];

        let mut scratch = TagSet::empty(m);
        let mut pc = 0usize;
        let mut steps = 0u64;
        loop {
            steps += 1;
            if steps > self.step_budget {
                return Err(Error::StepBudget { budget: self.step_budget });
            }
            let mut next = pc + 1;
            match prog.instrs[pc] {
                Instr::LoadInput { dst, index } => {
                    // The index value's own tags are dropped: reading
                    // input[f(x)] tags the result with the byte actually
                    // read, not with the bytes that chose it.
                    let idx = self.op(index) as usize;
                    let d = dst as usize;
                    self.reg_tags[d].clear();
                    if idx < input.len() && idx < m {
                        self.regs[d] = input[idx] as u64;
                        self.reg_tags[d].insert(idx);
                    } else {
                        self.regs[d] = 0;
                    }
                }
                Instr::Const { dst, value } => {
                    self.regs[dst as usize] = value;
                    self.reg_tags[dst as usize].clear();
                }
                Instr::Bin { op, dst, a, b } => {
                    let v = op.eval(self.op(a), self.op(b));
                    self.union_operands(a, b, &mut scratch);
                    let d = dst as usize;
                    self.regs[d] = v;
                    std::mem::swap(&mut self.reg_tags[d], &mut scratch);
                }
                Instr::LoadMem { dst, addr } => {
                    let a = self.op(addr) as usize;
                    let d = dst as usize;
                    self.regs[d] = self.mem.get(a).copied().unwrap_or(0) as u64;
                    self.reg_tags[d].clear();
                    if let Some(t) = self.mem_tags.get(a) {
                        // Sidestep the borrow: copy via scratch.
                        scratch.clear();
                        scratch.union_assign(t);
                        std::mem::swap(&mut self.reg_tags[d], &mut scratch);
                    }
                }
                Instr::StoreMem { addr, src } => {
                    let a = self.op(addr) as usize;
                    if a < self.mem.len() {
                        self.mem[a] = self.op(src) as u8;
                        scratch.clear();
                        if let Operand::Reg(r) = src {
                            scratch.union_assign(&self.reg_tags[r as usize]);
                        }
                        std::mem::swap(&mut self.mem_tags[a], &mut scratch);
                    }
                }
                Instr::CmpBranch { pred, a, b, sink, taken, not_taken } => {
                    let (l, r) = (self.op(a), self.op(b));
                    if let Some(s) = sink {
                        let s = s as usize;
                        self.union_operands(a, b, &mut scratch);
                        sink_tags[s].union_assign(&scratch);
                        if !sink_seen[s] {
                            sink_seen[s] = true;
                            sink_vals[s] = Some(SinkValue::Branch { left: l, right: r });
                        }
                    }
                    // Control dependence is not propagated: whichever arm
                    // runs next sees no trace of the condition's tags.
                    next = if pred.eval(l, r) { taken as usize } else { not_taken as usize };
                }
                Instr::Jmp { target } => next = target as usize,
                Instr::CallExt { func, a, b, dst } => {
                    let v = ExtFn::eval(func, self.op(a), self.op(b));
                    self.regs[dst as usize] = v;
                    self.reg_tags[dst as usize].clear();
                }
                Instr::SinkScalar { sink, value } => {
                    let s = sink as usize;
                    scratch.clear();
                    if let Operand::Reg(r) = value {
                        scratch.union_assign(&self.reg_tags[r as usize]);
                    }
                    sink_tags[s].union_assign(&scratch);
                    if !sink_seen[s] {
                        sink_seen[s] = true;
                        sink_vals[s] = Some(SinkValue::Scalar(self.op(value)));
                    }
                }
                Instr::Halt => break,
            }
            pc = next;
        }

        Ok(TaintOutcome {
            sink_tags,
            sink_values: sink_vals,
            reg_tags: self.reg_tags.clone(),
            steps,
        })
    }

    fn union_operands(&self, a: Operand, b: Operand, out: &mut TagSet) {
        out.clear();
        if let Operand::Reg(r) = a {
            out.union_assign(&self.reg_tags[r as usize]);
        }
        if let Operand::Reg(r) = b {
            out.union_assign(&self.reg_tags[r as usize]);
        }
    }

    #[inline(always)]
    fn op(&self, o: Operand) -> u64 {
        match o {
            Operand::Reg(r) => self.regs[r as usize],
            Operand::Imm(v) => v,
        }
    }
}

fn resize_tags(tags: &mut Vec<TagSet>, count: usize, universe: usize) {
    if tags.len() == count && tags.first().map_or(universe == 0, |t| t.universe() == universe) {
        for t in tags.iter_mut() {
            t.clear();
        }
    } else {
        tags.clear();
        tags.resize_with(count, || TagSet::empty(universe));
    }
}

/// One-shot propagation with the default step budget.
pub fn propagate(prog: &MicroProgram, input: &[u8]) -> Result<TaintOutcome> {
    TaintVm::new().propagate(prog, input)
}

/// How often each input byte appears in a sink tag set across a corpus,
/// counting each (run, sink) pair once. This is the rule-based analogue of
/// a saliency map: the byte ranking a taint tool would hand a fuzzer.
pub fn aggregate_tainted_bytes<'a, I>(prog: &MicroProgram, inputs: I) -> Result<Vec<u64>>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut counts = vec![0u64; prog.input_len];
    let mut vm = TaintVm::new();
    for input in inputs {
        let outcome = vm.propagate(prog, input)?;
        for tags in &outcome.sink_tags {
            for j in tags.iter() {
                counts[j] += 1;
            }
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{BinOp, Pred, ProgramBuilder, Vm};
    use proptest::prelude::*;

    /// compose: z = a*a + b - b. Every rule-based tracker reports both
    /// bytes at the sink even though b cancels.
    #[test]
    fn compose_sink_tags_are_exactly_bytes_0_and_1() {
        let mut b = ProgramBuilder::new("compose", 6);
        let a = b.reg();
        let bb = b.reg();
        let c = b.reg();
        let z = b.reg();
        let sink = b.scalar_sink("compose.z");
        b.load_input(a, 0u64);
        b.load_input(bb, 1u64);
        b.bin(BinOp::Mul, c, a, a);
        b.bin(BinOp::Add, c, c, bb);
        b.bin(BinOp::Sub, z, c, bb);
        b.sink_scalar(sink, z);
        b.halt();
        let prog = b.finish().unwrap();

        let outcome = propagate(&prog, &[7, 3, 0, 0, 0, 0]).unwrap();
        assert_eq!(outcome.sink_tags[0].to_vec(), vec![0, 1]);
        assert_eq!(outcome.sink_values[0], Some(SinkValue::Scalar(49)));
    }

    /// Rolling shift accumulator: tags pile up across iterations while the
    /// extracted low byte only ever depends on the most recent read.
    #[test]
    fn shift_accumulator_overtaints() {
        let iters = 4u64;
        let mut b = ProgramBuilder::new("roll", 16);
        let i = b.reg();
        let hold = b.reg();
        let byte = b.reg();
        let dist = b.reg();
        let idx = b.reg();
        let sinks: Vec<_> = (0..iters)
            .map(|k| b.branch_sink(&format!("roll.dist{k}"), Pred::Gt))
            .collect();
        let top = b.label();
        let body = b.label();
        let done = b.label();
        b.konst(i, 0);
        b.konst(hold, 0);
        b.place(top);
        b.cmp_branch(Pred::Lt, i, iters, None, body, done);
        b.place(body);
        // hold = (hold << 8) | input[2i] ... | input[2i+1] << 8... keep it
        // simple: two reads, low byte of hold is always the second one.
        b.bin(BinOp::Mul, idx, i, 2u64);
        b.load_input(byte, idx);
        b.bin(BinOp::Shl, hold, hold, 8u64);
        b.bin(BinOp::Or, hold, hold, byte);
        b.bin(BinOp::Add, idx, idx, 1u64);
        b.load_input(byte, idx);
        b.bin(BinOp::Shl, hold, hold, 8u64);
        b.bin(BinOp::Or, hold, hold, byte);
        b.bin(BinOp::And, dist, hold, 0xffu64);
        // Unrolled sink dispatch: compare dist per iteration index.
        let after = b.label();
        for (k, &s) in sinks.iter().enumerate() {
            let next_check = b.label();
            let hit = b.label();
            b.cmp_branch(Pred::Eq, i, k as u64, None, hit, next_check);
            b.place(hit);
            b.check(Pred::Gt, dist, 0x40u64, s);
            b.jmp(after);
            b.place(next_check);
        }
        b.place(after);
        b.bin(BinOp::Add, i, i, 1u64);
        b.jmp(top);
        b.place(done);
        b.halt();
        let prog = b.finish().unwrap();

        let input: Vec<u8> = (0..16).map(|v| (v * 17 + 3) as u8).collect();
        let outcome = propagate(&prog, &input).unwrap();
        // Iteration k extracts input[2k+1]; its true dependence is that one
        // byte, but the accumulated tags cover all bytes read so far.
        for k in 0..iters as usize {
            let tags = &outcome.sink_tags[k];
            let expected_true = 2 * k + 1;
            assert!(tags.contains(expected_true));
            let want: Vec<usize> = (0..=(2 * k + 1)).collect();
            assert_eq!(tags.to_vec(), want, "iteration {k} should drag along all prior reads");
        }
        // Growth: last sink carries at least twice the tags the true
        // dependence would justify.
        assert!(outcome.sink_tags[3].len() >= 2 * 1);
        assert_eq!(outcome.sink_tags[3].len(), 8);
    }

    /// Table-driven decode: the loaded cell holds a constant, so the tags
    /// vanish even though the input byte picked the cell.
    #[test]
    fn pointer_indexing_undertaints() {
        let mut b = ProgramBuilder::new("table", 4);
        let x = b.reg();
        let idx = b.reg();
        let v = b.reg();
        let s = b.branch_sink("table.check", Pred::Gt);
        // table[i] = 16 - i at addresses 0..16
        for i in 0..16u64 {
            b.store_mem(i, 16 - i);
        }
        b.load_input(x, 0u64);
        b.bin(BinOp::And, idx, x, 0xfu64);
        b.load_mem(v, idx);
        b.check(Pred::Gt, v, 8u64, s);
        b.halt();
        let prog = b.finish().unwrap();

        // Byte 0 genuinely decides the sink value...
        let mut vm = Vm::new();
        let lo = vm.run(&prog, &[0x02, 0, 0, 0]).unwrap();
        let hi = vm.run(&prog, &[0x0e, 0, 0, 0]).unwrap();
        assert_ne!(lo.sink_values[0], hi.sink_values[0]);
        // ...but the tags are empty: the address's taint was dropped.
        let outcome = propagate(&prog, &[0x02, 0, 0, 0]).unwrap();
        assert!(outcome.sink_tags[0].is_empty());
    }

    /// A flag assigned constants under a branch: the classic implicit-flow
    /// miss. The final check's tags are empty although the input byte fully
    /// determines its outcome.
    #[test]
    fn implicit_flow_undertaints() {
        let mut b = ProgramBuilder::new("implicit", 4);
        let x = b.reg();
        let flag = b.reg();
        let s = b.branch_sink("implicit.closing", Pred::Eq);
        let is_slash = b.label();
        let not_slash = b.label();
        let merge = b.label();
        b.load_input(x, 0u64);
        b.cmp_branch(Pred::Eq, x, b'/' as u64, None, is_slash, not_slash);
        b.place(is_slash);
        b.konst(flag, 2); // CLOSING
        b.jmp(merge);
        b.place(not_slash);
        b.konst(flag, 1); // OPEN
        b.jmp(merge);
        b.place(merge);
        b.check(Pred::Eq, flag, 2u64, s);
        b.halt();
        let prog = b.finish().unwrap();

        let slash = propagate(&prog, &[b'/', 0, 0, 0]).unwrap();
        let other = propagate(&prog, &[b'a', 0, 0, 0]).unwrap();
        // Outcomes differ with the byte, tags stay empty either way.
        assert_ne!(slash.sink_values[0], other.sink_values[0]);
        assert!(slash.sink_tags[0].is_empty());
        assert!(other.sink_tags[0].is_empty());
    }

    #[test]
    fn external_calls_launder_tags() {
        let mut b = ProgramBuilder::new("extern", 4);
        let x = b.reg();
        let packed = b.reg();
        let r = b.reg();
        let s = b.branch_sink("extern.nameok", Pred::Eq);
        b.load_input(x, 0u64);
        b.bin(BinOp::Shl, packed, x, 8u64);
        b.load_input(x, 1u64);
        b.bin(BinOp::Or, packed, packed, x);
        b.call_ext(ExtFn::Strcmp, packed, 0x4142u64, r);
        b.check(Pred::Eq, r, 0u64, s);
        b.halt();
        let prog = b.finish().unwrap();

        let hit = propagate(&prog, &[0x41, 0x42, 0, 0]).unwrap();
        assert_eq!(hit.sink_values[0], Some(SinkValue::Branch { left: 0, right: 0 }));
        assert!(hit.sink_tags[0].is_empty());
    }

    #[test]
    fn unreached_sink_has_empty_tags() {
        let mut b = ProgramBuilder::new("gated", 2);
        let x = b.reg();
        let g = b.branch_sink("g", Pred::Eq);
        let deep = b.branch_sink("d", Pred::Eq);
        let end = b.label();
        b.load_input(x, 0u64);
        b.gate(Pred::Eq, x, 1u64, g, end);
        b.load_input(x, 1u64);
        b.check(Pred::Eq, x, 9u64, deep);
        b.place(end);
        b.halt();
        let prog = b.finish().unwrap();
        let blocked = propagate(&prog, &[0, 9]).unwrap();
        assert!(blocked.sink_values[1].is_none());
        assert!(blocked.sink_tags[1].is_empty());
        let open = propagate(&prog, &[1, 9]).unwrap();
        assert_eq!(open.sink_tags[1].to_vec(), vec![1]);
    }

    #[test]
    fn aggregation_counts_sink_memberships() {
        // Byte 0 feeds two sinks, byte 1 feeds one.
        let mut b = ProgramBuilder::new("agg", 2);
        let x = b.reg();
        let y = b.reg();
        let s1 = b.branch_sink("a", Pred::Ge);
        let s2 = b.branch_sink("b", Pred::Ge);
        let s3 = b.branch_sink("c", Pred::Ge);
        b.load_input(x, 0u64);
        b.load_input(y, 1u64);
        b.check(Pred::Ge, x, 10u64, s1);
        b.check(Pred::Ge, x, 200u64, s2);
        b.check(Pred::Ge, y, 10u64, s3);
        b.halt();
        let prog = b.finish().unwrap();

        let inputs: Vec<Vec<u8>> = vec![vec![5, 9], vec![250, 30], vec![77, 1]];
        let counts =
            aggregate_tainted_bytes(&prog, inputs.iter().map(|v| v.as_slice())).unwrap();
        assert_eq!(counts, vec![6, 3]);
    }

    #[test]
    fn propagation_is_deterministic() {
        let mut b = ProgramBuilder::new("det", 4);
        let x = b.reg();
        let acc = b.reg();
        let s = b.scalar_sink("det.acc");
        b.konst(acc, 0);
        for i in 0..4u64 {
            b.load_input(x, i);
            b.bin(BinOp::Add, acc, acc, x);
        }
        b.sink_scalar(s, acc);
        b.halt();
        let prog = b.finish().unwrap();
        let mut vm = TaintVm::new();
        let a = vm.propagate(&prog, &[1, 2, 3, 4]).unwrap();
        let b2 = vm.propagate(&prog, &[1, 2, 3, 4]).unwrap();
        assert_eq!(a.sink_tags, b2.sink_tags);
        assert_eq!(a.sink_values, b2.sink_values);
        assert_eq!(a.sink_tags[0].to_vec(), vec![0, 1, 2, 3]);
    }

    /// Tag interpreter and plain interpreter must agree on concrete
    /// behavior: same path, same sink values.
    #[test]
    fn tag_vm_matches_concrete_vm_on_branching_programs() {
        let mut b = ProgramBuilder::new("twins", 8);
        let x = b.reg();
        let y = b.reg();
        let s1 = b.branch_sink("t.a", Pred::Lt);
        let s2 = b.branch_sink("t.b", Pred::Eq);
        let s3 = b.scalar_sink("t.c");
        let deep = b.label();
        let end = b.label();
        b.load_input(x, 0u64);
        b.load_input(y, 1u64);
        b.gate(Pred::Lt, x, 128u64, s1, end);
        b.check(Pred::Eq, y, 7u64, s2);
        b.bin(BinOp::Mul, y, y, x);
        b.sink_scalar(s3, y);
        b.jmp(end);
        b.place(deep);
        b.place(end);
        b.halt();
        let prog = b.finish().unwrap();

        let mut vm = Vm::new();
        let mut tvm = TaintVm::new();
        let mut rng_state = 0x12345678u64;
        for _ in 0..200 {
            // xorshift for cheap deterministic fuzz inputs
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            let input: Vec<u8> = rng_state.to_le_bytes().to_vec();
            let concrete = vm.run(&prog, &input).unwrap();
            let tagged = tvm.propagate(&prog, &input).unwrap();
            assert_eq!(concrete.sink_values, tagged.sink_values);
        }
    }

    // Soundness on straight-line data flow: if exhaustively flipping byte j
    // changes a scalar sink's value, then j must be in the sink's tag set.
    // Only holds without pointers, branches, and external calls, which is
    // exactly the regime the generator stays in.
    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn straightline_dataflow_is_never_undertainted(
            ops in prop::collection::vec((0u8..6, 0usize..4, 0usize..4, 0u64..256), 1..12),
            input in prop::collection::vec(any::<u8>(), 4),
        ) {
            let m = 4usize;
            let mut b = ProgramBuilder::new("prop", m);
            let loads: Vec<_> = (0..m).map(|_| b.reg()).collect();
            for (j, &r) in loads.iter().enumerate() {
                b.load_input(r, j as u64);
            }
            let mut last = loads[0];
            for &(opk, ai, bi, imm) in &ops {
                let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Shl, BinOp::Shr, BinOp::And][opk as usize];
                let dst = b.reg();
                // Mix registers and immediates; shift amounts kept small.
                let bv: Operand = if imm % 3 == 0 {
                    Operand::Imm(imm % 8)
                } else {
                    Operand::Reg(loads[bi])
                };
                b.bin(op, dst, loads[ai], bv);
                last = dst;
            }
            let s = b.scalar_sink("prop.out");
            b.sink_scalar(s, last);
            b.halt();
            let prog = b.finish().unwrap();

            let tags = propagate(&prog, &input).unwrap().sink_tags[0].clone();
            let mut vm = Vm::new();
            let base = vm.run_sinks(&prog, &input).unwrap()[0];
            let mut mutant = input.clone();
            for j in 0..m {
                let orig = mutant[j];
                let mut influences = false;
                for v in 0..=255u8 {
                    if v == orig {
                        continue;
                    }
                    mutant[j] = v;
                    if vm.run_sinks(&prog, &mutant).unwrap()[0] != base {
                        influences = true;
                        break;
                    }
                }
                mutant[j] = orig;
                if influences {
                    prop_assert!(
                        tags.contains(j),
                        "byte {j} influences the sink but is untagged (tags {:?})",
                        tags.to_vec()
                    );
                }
            }
        }
    }
}
