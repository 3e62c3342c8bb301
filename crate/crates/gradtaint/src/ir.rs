//! Micro-IR: a small register machine the analysis targets are written in.
//!
//! Programs run over unsigned 64-bit virtual registers, a byte-addressed
//! scratch memory, and a read-only input buffer of `input_len` bytes. Two
//! instructions mark sinks: `cmp_branch` records its operand pair under a
//! declared branch sink and then transfers control, and `sink_scalar`
//! records a register value under a declared scalar sink. Everything a run
//! observes (sink values, control-flow edges, which input bytes were read)
//! is a pure function of the input bytes.
//!
//! Value semantics, chosen so no input can crash a run:
//! - arithmetic wraps; division by zero yields 0; shift counts are masked
//!   to the low 6 bits
//! - out-of-range input reads yield 0, out-of-range memory accesses load 0
//!   or drop the store
//! - memory cells are bytes: stores keep the low 8 bits, loads zero-extend
//!
//! A sink hit more than once in a run keeps its first recorded value; a
//! sink never hit stays unrecorded for that run. Blocks are maximal
//! straight-line instruction runs; an edge is an ordered pair of block ids,
//! and the set of edges a program could ever traverse is enumerable
//! statically.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type RegId = u16;
pub type SinkId = u16;

/// Default step budget, far above anything the in-repo programs need but
/// small enough to flag runaway loops quickly.
pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    Reg(RegId),
    Imm(u64),
}

impl From<RegId> for Operand {
    fn from(r: RegId) -> Operand {
        Operand::Reg(r)
    }
}

impl From<u64> for Operand {
    fn from(v: u64) -> Operand {
        Operand::Imm(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Shl,
    Shr,
    And,
    Or,
}

impl BinOp {
    pub fn eval(self, a: u64, b: u64) -> u64 {
        match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
            BinOp::Div => {
                if b == 0 {
                    0
                } else {
                    a / b
                }
            }
            BinOp::Shl => a << (b & 63),
            BinOp::Shr => a >> (b & 63),
            BinOp::And => a & b,
            BinOp::Or => a | b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Shl => "shl",
            BinOp::Shr => "shr",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

/// Comparison predicates, unsigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pred {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Pred {
    pub fn eval(self, a: u64, b: u64) -> bool {
        match self {
            Pred::Eq => a == b,
            Pred::Ne => a != b,
            Pred::Lt => a < b,
            Pred::Le => a <= b,
            Pred::Gt => a > b,
            Pred::Ge => a >= b,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pred::Eq => "eq",
            Pred::Ne => "ne",
            Pred::Lt => "lt",
            Pred::Le => "le",
            Pred::Gt => "gt",
            Pred::Ge => "ge",
        }
    }

    pub fn parse(s: &str) -> Option<Pred> {
        Some(match s {
            "eq" => Pred::Eq,
            "ne" => Pred::Ne,
            "lt" => Pred::Lt,
            "le" => Pred::Le,
            "gt" => Pred::Gt,
            "ge" => Pred::Ge,
            _ => return None,
        })
    }
}

/// External functions modelling opaque library calls. `Strcmp` compares two
/// packed words and returns 0 on equality, 1 otherwise, like the libc
/// convention collapsed to a flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtFn {
    Strcmp,
}

impl ExtFn {
    pub fn eval(self, a: u64, b: u64) -> u64 {
        match self {
            ExtFn::Strcmp => u64::from(a != b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExtFn::Strcmp => "strcmp",
        }
    }

    pub fn parse(s: &str) -> Option<ExtFn> {
        match s {
            "strcmp" => Some(ExtFn::Strcmp),
            _ => None,
        }
    }
}

/// Instructions after linking: control targets are absolute instruction
/// indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    LoadInput { dst: RegId, index: Operand },
    Const { dst: RegId, value: u64 },
    Bin { op: BinOp, dst: RegId, a: Operand, b: Operand },
    LoadMem { dst: RegId, addr: Operand },
    StoreMem { addr: Operand, src: Operand },
    CmpBranch { pred: Pred, a: Operand, b: Operand, sink: Option<SinkId>, taken: u32, not_taken: u32 },
    Jmp { target: u32 },
    CallExt { func: ExtFn, a: Operand, b: Operand, dst: RegId },
    SinkScalar { sink: SinkId, value: Operand },
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkKind {
    Branch(Pred),
    Scalar,
}

/// A declared sink. Declaration order is the program's fixed sink ordering:
/// dataset columns, network outputs, and coverage strata all index sinks by
/// this order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkDecl {
    pub id: String,
    pub kind: SinkKind,
}

/// Value recorded at a sink during one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkValue {
    Branch { left: u64, right: u64 },
    Scalar(u64),
}

impl SinkValue {
    /// Branch sinks normalize to 1 when the predicate holds. A sink that
    /// was never reached normalizes to 0 alongside reached-but-false, which
    /// is exactly the "branch not taken" reading.
    pub fn branch_outcome(pred: Pred, value: Option<SinkValue>) -> bool {
        match value {
            Some(SinkValue::Branch { left, right }) => pred.eval(left, right),
            Some(SinkValue::Scalar(_)) => panic!("scalar value recorded under branch sink"),
            None => false,
        }
    }
}

/// Everything observed during one concrete run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    /// First recorded value per declared sink, `None` when never reached.
    pub sink_values: Vec<Option<SinkValue>>,
    /// Distinct control-flow edges traversed, sorted.
    pub edges: Vec<(u32, u32)>,
    /// Distinct input indices read, sorted. A byte outside this set cannot
    /// have influenced the run.
    pub reads: Vec<u32>,
    pub steps: u64,
}

#[derive(Debug, Clone)]
pub struct MicroProgram {
    pub name: String,
    pub input_len: usize,
    pub mem_size: usize,
    pub reg_count: usize,
    pub instrs: Vec<Instr>,
    pub sinks: Vec<SinkDecl>,
    /// Block id for every instruction index.
    block_of: Vec<u32>,
    block_count: u32,
}

impl MicroProgram {
    /// Validates instruction operands and computes the block structure.
    /// Rejects dangling control targets, sink references that do not match
    /// their declaration, and register ids outside `reg_count`.
    pub fn link(
        name: String,
        input_len: usize,
        mem_size: usize,
        reg_count: usize,
        instrs: Vec<Instr>,
        sinks: Vec<SinkDecl>,
    ) -> Result<MicroProgram> {
        if input_len == 0 {
            return Err(Error::contract("program input_len must be positive"));
        }
        if instrs.is_empty() {
            return Err(Error::contract("program has no instructions"));
        }
        let n = instrs.len();
        let check_reg = |r: RegId| -> Result<()> {
            if (r as usize) < reg_count {
                Ok(())
            } else {
                Err(Error::contract(format!("register r{r} outside reg_count {reg_count}")))
            }
        };
        let check_op = |o: Operand| -> Result<()> {
            match o {
                Operand::Reg(r) => check_reg(r),
                Operand::Imm(_) => Ok(()),
            }
        };
        let check_target = |t: u32| -> Result<()> {
            if (t as usize) < n {
                Ok(())
            } else {
                Err(Error::contract(format!("control target {t} outside program of {n} instrs")))
            }
        };
        let check_sink = |s: SinkId, want_branch: Option<Pred>| -> Result<()> {
            let decl = sinks
                .get(s as usize)
                .ok_or_else(|| Error::contract(format!("undeclared sink {s}")))?;
            match (want_branch, decl.kind) {
                (Some(p), SinkKind::Branch(dp)) if p == dp => Ok(()),
                (None, SinkKind::Scalar) => Ok(()),
                _ => Err(Error::contract(format!(
                    "sink '{}' used with mismatched kind or predicate",
                    decl.id
                ))),
            }
        };
        for ins in &instrs {
            match *ins {
                Instr::LoadInput { dst, index } => {
                    check_reg(dst)?;
                    check_op(index)?;
                }
                Instr::Const { dst, .. } => check_reg(dst)?,
                Instr::Bin { dst, a, b, .. } => {
                    check_reg(dst)?;
                    check_op(a)?;
                    check_op(b)?;
                }
                Instr::LoadMem { dst, addr } => {
                    check_reg(dst)?;
                    check_op(addr)?;
                }
                Instr::StoreMem { addr, src } => {
                    check_op(addr)?;
                    check_op(src)?;
                }
                Instr::CmpBranch { pred, a, b, sink, taken, not_taken } => {
                    check_op(a)?;
                    check_op(b)?;
                    if let Some(s) = sink {
                        check_sink(s, Some(pred))?;
                    }
                    check_target(taken)?;
                    check_target(not_taken)?;
                }
                Instr::Jmp { target } => check_target(target)?,
                Instr::CallExt { a, b, dst, .. } => {
                    check_op(a)?;
                    check_op(b)?;
                    check_reg(dst)?;
                }
                Instr::SinkScalar { sink, value } => {
                    check_sink(sink, None)?;
                    check_op(value)?;
                }
                Instr::Halt => {}
            }
        }
        let mut ids = std::collections::HashSet::new();
        for decl in &sinks {
            if !ids.insert(decl.id.as_str()) {
                return Err(Error::contract(format!("duplicate sink id '{}'", decl.id)));
            }
        }

        // Blocks: leaders are instruction 0, every control target, and every
        // instruction after a terminator.
        let mut leader = vec![false; n];
        leader[0] = true;
        for (idx, ins) in instrs.iter().enumerate() {
            match *ins {
                Instr::CmpBranch { taken, not_taken, .. } => {
                    leader[taken as usize] = true;
                    leader[not_taken as usize] = true;
                    if idx + 1 < n {
                        leader[idx + 1] = true;
                    }
                }
                Instr::Jmp { target } => {
                    leader[target as usize] = true;
                    if idx + 1 < n {
                        leader[idx + 1] = true;
                    }
                }
                Instr::Halt => {
                    if idx + 1 < n {
                        leader[idx + 1] = true;
                    }
                }
                _ => {}
            }
        }
        let mut block_of = vec![0u32; n];
        let mut block = 0u32;
        for idx in 0..n {
            if idx > 0 && leader[idx] {
                block += 1;
            }
            block_of[idx] = block;
        }
        let block_count = block + 1;

        // Falling off the end of the instruction list would be an implicit
        // halt; require an explicit one so intent is visible.
        match instrs[n - 1] {
            Instr::Halt | Instr::Jmp { .. } | Instr::CmpBranch { .. } => {}
            _ => return Err(Error::contract("last instruction must be halt, jmp, or cmp_branch")),
        }

        Ok(MicroProgram {
            name,
            input_len,
            mem_size,
            reg_count,
            instrs,
            sinks,
            block_of,
            block_count,
        })
    }

    pub fn block_of(&self, pc: usize) -> u32 {
        self.block_of[pc]
    }

    pub fn block_count(&self) -> u32 {
        self.block_count
    }

    pub fn sink_index(&self, id: &str) -> Option<SinkId> {
        self.sinks.iter().position(|s| s.id == id).map(|i| i as SinkId)
    }

    /// All edges any run could traverse: branch targets, jump targets, and
    /// straight-line fallthrough into a mid-stream leader.
    pub fn edge_universe(&self) -> Vec<(u32, u32)> {
        let mut edges = std::collections::BTreeSet::new();
        let n = self.instrs.len();
        for (idx, ins) in self.instrs.iter().enumerate() {
            let from = self.block_of[idx];
            match *ins {
                Instr::CmpBranch { taken, not_taken, .. } => {
                    edges.insert((from, self.block_of[taken as usize]));
                    edges.insert((from, self.block_of[not_taken as usize]));
                }
                Instr::Jmp { target } => {
                    edges.insert((from, self.block_of[target as usize]));
                }
                Instr::Halt => {}
                _ => {
                    if idx + 1 < n && self.block_of[idx + 1] != from {
                        edges.insert((from, self.block_of[idx + 1]));
                    }
                }
            }
        }
        edges.into_iter().collect()
    }
}

/// Reusable concrete interpreter. One instance amortizes register, memory,
/// and edge scratch across runs; every public entry point resets state, so
/// runs are independent.
pub struct Vm {
    regs: Vec<u64>,
    mem: Vec<u8>,
    sink_seen: Vec<bool>,
    sink_vals: Vec<Option<SinkValue>>,
    edge_seen: Vec<bool>,
    edge_list: Vec<(u32, u32)>,
    read_seen: Vec<bool>,
    read_list: Vec<u32>,
    pub step_budget: u64,
}

impl Default for Vm {
    fn default() -> Self {
        Vm::new()
    }
}

impl Vm {
    pub fn new() -> Vm {
        Vm {
            regs: Vec::new(),
            mem: Vec::new(),
            sink_seen: Vec::new(),
            sink_vals: Vec::new(),
            edge_seen: Vec::new(),
            edge_list: Vec::new(),
            read_seen: Vec::new(),
            read_list: Vec::new(),
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }

    /// Full-observation run: sink values, edges, and the read set.
    pub fn run(&mut self, prog: &MicroProgram, input: &[u8]) -> Result<ExecutionTrace> {
        self.run_impl::<true>(prog, input)
    }

    /// Sinks-only run, the hot path for oracle sweeps. Roughly twice as
    /// fast as `run` because edge and read bookkeeping is compiled out.
    pub fn run_sinks(&mut self, prog: &MicroProgram, input: &[u8]) -> Result<Vec<Option<SinkValue>>> {
        Ok(self.run_impl::<false>(prog, input)?.sink_values)
    }

    fn run_impl<const OBSERVE: bool>(
        &mut self,
        prog: &MicroProgram,
        input: &[u8],
    ) -> Result<ExecutionTrace> {
        self.regs.clear();
        self.regs.resize(prog.reg_count, 0);
        self.mem.clear();
        self.mem.resize(prog.mem_size, 0);
        self.sink_seen.clear();
        self.sink_seen.resize(prog.sinks.len(), false);
        self.sink_vals.clear();
        self.sink_vals.resize(prog.sinks.len(), None);
        if OBSERVE {
            let nb = prog.block_count as usize;
            self.edge_seen.clear();
            self.edge_seen.resize(nb * nb, false);
            self.edge_list.clear();
            self.read_seen.clear();
            self.read_seen.resize(prog.input_len, false);
            self.read_list.clear();
        }

        let instrs = &prog.instrs;
        let mut pc = 0usize;
        let mut cur_block = 0u32;
        let mut steps = 0u64;
        loop {
            steps += 1;
            if steps > self.step_budget {
                return Err(Error::StepBudget { budget: self.step_budget });
            }
            if OBSERVE {
                let b = prog.block_of[pc];
                if b != cur_block {
                    let key = cur_block as usize * prog.block_count as usize + b as usize;
                    if !self.edge_seen[key] {
                        self.edge_seen[key] = true;
                        self.edge_list.push((cur_block, b));
                    }
                    cur_block = b;
                }
            }
            let mut next = pc + 1;
            match instrs[pc] {
                Instr::LoadInput { dst, index } => {
                    let idx = self.op(index) as usize;
                    let v = if idx < input.len() {
                        if OBSERVE && !self.read_seen[idx] {
                            self.read_seen[idx] = true;
                            self.read_list.push(idx as u32);
                        }
                        input[idx] as u64
                    } else {
                        0
                    };
                    self.regs[dst as usize] = v;
                }
                Instr::Const { dst, value } => self.regs[dst as usize] = value,
                Instr::Bin { op, dst, a, b } => {
                    self.regs[dst as usize] = op.eval(self.op(a), self.op(b));
                }
                Instr::LoadMem { dst, addr } => {
                    let a = self.op(addr) as usize;
                    self.regs[dst as usize] = self.mem.get(a).copied().unwrap_or(0) as u64;
                }
                Instr::StoreMem { addr, src } => {
                    let a = self.op(addr) as usize;
                    let v = self.op(src) as u8;
                    if a < self.mem.len() {
                        self.mem[a] = v;
                    }
                }
                Instr::CmpBranch { pred, a, b, sink, taken, not_taken } => {
                    let (l, r) = (self.op(a), self.op(b));
                    if let Some(s) = sink {
                        let s = s as usize;
                        if !self.sink_seen[s] {
                            self.sink_seen[s] = true;
                            self.sink_vals[s] = Some(SinkValue::Branch { left: l, right: r });
                        }
                    }
                    next = if pred.eval(l, r) { taken as usize } else { not_taken as usize };
                }
                Instr::Jmp { target } => next = target as usize,
                Instr::CallExt { func, a, b, dst } => {
                    self.regs[dst as usize] = func.eval(self.op(a), self.op(b));
                }
                Instr::SinkScalar { sink, value } => {
                    let s = sink as usize;
                    if !self.sink_seen[s] {
                        self.sink_seen[s] = true;
                        self.sink_vals[s] = Some(SinkValue::Scalar(self.op(value)));
                    }
                }
                Instr::Halt => break,
            }
            pc = next;
        }

        let mut edges = if OBSERVE { std::mem::take(&mut self.edge_list) } else { Vec::new() };
        edges.sort_unstable();
        let mut reads = if OBSERVE { std::mem::take(&mut self.read_list) } else { Vec::new() };
        reads.sort_unstable();
        Ok(ExecutionTrace { sink_values: std::mem::take(&mut self.sink_vals), edges, reads, steps })
    }

    #[inline(always)]
    fn op(&self, o: Operand) -> u64 {
        match o {
            Operand::Reg(r) => self.regs[r as usize],
            Operand::Imm(v) => v,
        }
    }
}

/// Label handle used while building; resolved to instruction indices at
/// `finish`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Label(usize);

/// Unlinked instruction: control targets still symbolic.
enum BInstr {
    Plain(Instr),
    CmpBranch { pred: Pred, a: Operand, b: Operand, sink: Option<SinkId>, taken: Label, not_taken: Label },
    Jmp { target: Label },
}

/// Incremental program builder. Targets construct their programs through
/// this rather than writing assembly text by hand.
pub struct ProgramBuilder {
    name: String,
    input_len: usize,
    mem_size: usize,
    next_reg: RegId,
    instrs: Vec<BInstr>,
    labels: Vec<Option<usize>>,
    sinks: Vec<SinkDecl>,
}

impl ProgramBuilder {
    pub fn new(name: &str, input_len: usize) -> ProgramBuilder {
        ProgramBuilder {
            name: name.to_string(),
            input_len,
            mem_size: 256,
            next_reg: 0,
            instrs: Vec::new(),
            labels: Vec::new(),
            sinks: Vec::new(),
        }
    }

    pub fn mem_size(&mut self, size: usize) -> &mut Self {
        self.mem_size = size;
        self
    }

    pub fn reg(&mut self) -> RegId {
        let r = self.next_reg;
        self.next_reg += 1;
        r
    }

    pub fn label(&mut self) -> Label {
        self.labels.push(None);
        Label(self.labels.len() - 1)
    }

    /// Binds `label` to the next emitted instruction.
    pub fn place(&mut self, label: Label) {
        assert!(self.labels[label.0].is_none(), "label placed twice");
        self.labels[label.0] = Some(self.instrs.len());
    }

    pub fn branch_sink(&mut self, id: &str, pred: Pred) -> SinkId {
        self.sinks.push(SinkDecl { id: id.to_string(), kind: SinkKind::Branch(pred) });
        (self.sinks.len() - 1) as SinkId
    }

    pub fn scalar_sink(&mut self, id: &str) -> SinkId {
        self.sinks.push(SinkDecl { id: id.to_string(), kind: SinkKind::Scalar });
        (self.sinks.len() - 1) as SinkId
    }

    pub fn load_input(&mut self, dst: RegId, index: impl Into<Operand>) {
        self.instrs.push(BInstr::Plain(Instr::LoadInput { dst, index: index.into() }));
    }

    pub fn konst(&mut self, dst: RegId, value: u64) {
        self.instrs.push(BInstr::Plain(Instr::Const { dst, value }));
    }

    pub fn bin(&mut self, op: BinOp, dst: RegId, a: impl Into<Operand>, b: impl Into<Operand>) {
        self.instrs.push(BInstr::Plain(Instr::Bin { op, dst, a: a.into(), b: b.into() }));
    }

    pub fn load_mem(&mut self, dst: RegId, addr: impl Into<Operand>) {
        self.instrs.push(BInstr::Plain(Instr::LoadMem { dst, addr: addr.into() }));
    }

    pub fn store_mem(&mut self, addr: impl Into<Operand>, src: impl Into<Operand>) {
        self.instrs.push(BInstr::Plain(Instr::StoreMem { addr: addr.into(), src: src.into() }));
    }

    pub fn cmp_branch(
        &mut self,
        pred: Pred,
        a: impl Into<Operand>,
        b: impl Into<Operand>,
        sink: Option<SinkId>,
        taken: Label,
        not_taken: Label,
    ) {
        self.instrs.push(BInstr::CmpBranch {
            pred,
            a: a.into(),
            b: b.into(),
            sink,
            taken,
            not_taken,
        });
    }

    pub fn jmp(&mut self, target: Label) {
        self.instrs.push(BInstr::Jmp { target });
    }

    pub fn call_ext(&mut self, func: ExtFn, a: impl Into<Operand>, b: impl Into<Operand>, dst: RegId) {
        self.instrs.push(BInstr::Plain(Instr::CallExt { func, a: a.into(), b: b.into(), dst }));
    }

    pub fn sink_scalar(&mut self, sink: SinkId, value: impl Into<Operand>) {
        self.instrs.push(BInstr::Plain(Instr::SinkScalar { sink, value: value.into() }));
    }

    pub fn halt(&mut self) {
        self.instrs.push(BInstr::Plain(Instr::Halt));
    }

    /// Recorded branch check that reconverges immediately: both outcomes
    /// continue at the next instruction, but through distinct blocks, so
    /// the outcome is visible in edge coverage. The workhorse for field
    /// checks in the toy targets.
    pub fn check(&mut self, pred: Pred, a: impl Into<Operand>, b: impl Into<Operand>, sink: SinkId) {
        let yes = self.label();
        let no = self.label();
        let merge = self.label();
        self.cmp_branch(pred, a, b, Some(sink), yes, no);
        self.place(yes);
        self.jmp(merge);
        self.place(no);
        self.jmp(merge);
        self.place(merge);
    }

    /// Guarded check: like `check`, but when the predicate fails control
    /// jumps to `on_fail` instead of reconverging. Used for stage gates.
    pub fn gate(
        &mut self,
        pred: Pred,
        a: impl Into<Operand>,
        b: impl Into<Operand>,
        sink: SinkId,
        on_fail: Label,
    ) {
        let ok = self.label();
        self.cmp_branch(pred, a, b, Some(sink), ok, on_fail);
        self.place(ok);
    }

    pub fn finish(self) -> Result<MicroProgram> {
        let resolve = |l: Label| -> Result<u32> {
            self.labels[l.0]
                .map(|idx| idx as u32)
                .ok_or_else(|| Error::contract(format!("label L{} never placed", l.0)))
        };
        let mut out = Vec::with_capacity(self.instrs.len());
        for ins in &self.instrs {
            out.push(match *ins {
                BInstr::Plain(ref i) => i.clone(),
                BInstr::CmpBranch { pred, a, b, sink, taken, not_taken } => Instr::CmpBranch {
                    pred,
                    a,
                    b,
                    sink,
                    taken: resolve(taken)?,
                    not_taken: resolve(not_taken)?,
                },
                BInstr::Jmp { target } => Instr::Jmp { target: resolve(target)? },
            });
        }
        MicroProgram::link(
            self.name,
            self.input_len,
            self.mem_size,
            self.next_reg as usize,
            out,
            self.sinks,
        )
    }
}

// Textual assembly, one instruction per line, `;` starts a comment.
// Canonical form as emitted:
//
//   .program toy_elf
//   .input 512
//   .mem 256
//   .regs 40
//   .sink 0 branch eq elf.magic0
//   .sink 1 scalar vl.length
//   L3:
//     load_input r0, 17
//     const r1, 0x7f
//     add r2, r0, r1
//     cmp_branch eq r2, 0x80, sink=0, L4, L5
//     jmp L3
//     call_ext strcmp r4, r5 -> r6
//     sink_scalar 1, r7
//     halt
//
// Labels name instruction indices; only indices that are control targets
// get a label line on emit.

fn fmt_operand(o: Operand) -> String {
    match o {
        Operand::Reg(r) => format!("r{r}"),
        Operand::Imm(v) => {
            if v > 9 {
                format!("0x{v:x}")
            } else {
                format!("{v}")
            }
        }
    }
}

/// Renders a program in canonical textual form. `parse_program` accepts
/// exactly this shape (modulo whitespace and comments), and the pair round
/// trips: emit(parse(emit(p))) == emit(p).
pub fn emit_program(prog: &MicroProgram) -> String {
    let mut out = String::new();
    writeln!(out, ".program {}", prog.name).unwrap();
    writeln!(out, ".input {}", prog.input_len).unwrap();
    writeln!(out, ".mem {}", prog.mem_size).unwrap();
    writeln!(out, ".regs {}", prog.reg_count).unwrap();
    for (i, s) in prog.sinks.iter().enumerate() {
        match s.kind {
            SinkKind::Branch(p) => writeln!(out, ".sink {i} branch {} {}", p.name(), s.id).unwrap(),
            SinkKind::Scalar => writeln!(out, ".sink {i} scalar {}", s.id).unwrap(),
        }
    }
    let mut is_target = vec![false; prog.instrs.len()];
    for ins in &prog.instrs {
        match *ins {
            Instr::CmpBranch { taken, not_taken, .. } => {
                is_target[taken as usize] = true;
                is_target[not_taken as usize] = true;
            }
            Instr::Jmp { target } => is_target[target as usize] = true,
            _ => {}
        }
    }
    for (idx, ins) in prog.instrs.iter().enumerate() {
        if is_target[idx] {
            writeln!(out, "L{idx}:").unwrap();
        }
        match *ins {
            Instr::LoadInput { dst, index } => {
                writeln!(out, "  load_input r{dst}, {}", fmt_operand(index)).unwrap()
            }
            Instr::Const { dst, value } => {
                writeln!(out, "  const r{dst}, {}", fmt_operand(Operand::Imm(value))).unwrap()
            }
            Instr::Bin { op, dst, a, b } => writeln!(
                out,
                "  {} r{dst}, {}, {}",
                op.name(),
                fmt_operand(a),
                fmt_operand(b)
            )
            .unwrap(),
            Instr::LoadMem { dst, addr } => {
                writeln!(out, "  load_mem r{dst}, {}", fmt_operand(addr)).unwrap()
            }
            Instr::StoreMem { addr, src } => {
                writeln!(out, "  store_mem {}, {}", fmt_operand(addr), fmt_operand(src)).unwrap()
            }
            Instr::CmpBranch { pred, a, b, sink, taken, not_taken } => {
                let sink_part = match sink {
                    Some(s) => format!("sink={s}, "),
                    None => String::new(),
                };
                writeln!(
                    out,
                    "  cmp_branch {} {}, {}, {sink_part}L{taken}, L{not_taken}",
                    pred.name(),
                    fmt_operand(a),
                    fmt_operand(b)
                )
                .unwrap()
            }
            Instr::Jmp { target } => writeln!(out, "  jmp L{target}").unwrap(),
            Instr::CallExt { func, a, b, dst } => writeln!(
                out,
                "  call_ext {} {}, {} -> r{dst}",
                func.name(),
                fmt_operand(a),
                fmt_operand(b)
            )
            .unwrap(),
            Instr::SinkScalar { sink, value } => {
                writeln!(out, "  sink_scalar {sink}, {}", fmt_operand(value)).unwrap()
            }
            Instr::Halt => writeln!(out, "  halt").unwrap(),
        }
    }
    out
}

fn parse_operand(tok: &str, line_no: usize) -> Result<Operand> {
    let bad = || Error::format("micro-ir", format!("line {line_no}: bad operand '{tok}'"));
    if let Some(rest) = tok.strip_prefix('r') {
        if let Ok(r) = rest.parse::<u16>() {
            return Ok(Operand::Reg(r));
        }
    }
    if let Some(hex) = tok.strip_prefix("0x") {
        return u64::from_str_radix(hex, 16).map(Operand::Imm).map_err(|_| bad());
    }
    tok.parse::<u64>().map(Operand::Imm).map_err(|_| bad())
}

fn parse_reg(tok: &str, line_no: usize) -> Result<RegId> {
    match parse_operand(tok, line_no)? {
        Operand::Reg(r) => Ok(r),
        Operand::Imm(_) => {
            Err(Error::format("micro-ir", format!("line {line_no}: expected register, got '{tok}'")))
        }
    }
}

/// Parses the textual form back into a program. Labels may be referenced
/// before they are defined; all control targets must resolve.
pub fn parse_program(text: &str) -> Result<MicroProgram> {
    let mut name = String::new();
    let mut input_len = 0usize;
    let mut mem_size = 256usize;
    let mut reg_count = 0usize;
    let mut sinks: BTreeMap<usize, SinkDecl> = BTreeMap::new();
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();

    struct PendingBranch {
        pred: Pred,
        a: Operand,
        b: Operand,
        sink: Option<SinkId>,
        taken: String,
        not_taken: String,
        line_no: usize,
    }
    enum PInstr {
        Ready(Instr),
        Branch(PendingBranch),
        Jmp { target: String, line_no: usize },
    }
    let mut instrs: Vec<PInstr> = Vec::new();

    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = match raw.find(';') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::format("micro-ir", format!("line {line_no}: {msg}"));

        if let Some(rest) = line.strip_prefix('.') {
            let mut parts = rest.split_whitespace();
            let key = parts.next().unwrap_or("");
            match key {
                "program" => name = parts.next().unwrap_or("").to_string(),
                "input" => {
                    input_len = parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err("bad .input".into()))?
                }
                "mem" => {
                    mem_size = parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err("bad .mem".into()))?
                }
                "regs" => {
                    reg_count = parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err("bad .regs".into()))?
                }
                "sink" => {
                    let idx: usize = parts
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| err("bad sink index".into()))?;
                    let kind_tok = parts.next().unwrap_or("");
                    let kind = match kind_tok {
                        "branch" => {
                            let p = parts
                                .next()
                                .and_then(Pred::parse)
                                .ok_or_else(|| err("bad sink predicate".into()))?;
                            SinkKind::Branch(p)
                        }
                        "scalar" => SinkKind::Scalar,
                        other => return Err(err(format!("unknown sink kind '{other}'"))),
                    };
                    let id = parts.next().ok_or_else(|| err("sink missing id".into()))?;
                    sinks.insert(idx, SinkDecl { id: id.to_string(), kind });
                }
                other => return Err(err(format!("unknown directive '.{other}'"))),
            }
            continue;
        }

        if let Some(label) = line.strip_suffix(':') {
            if labels.insert(label.to_string(), instrs.len()).is_some() {
                return Err(err(format!("label '{label}' defined twice")));
            }
            continue;
        }

        let (mnemonic, rest) = match line.find(char::is_whitespace) {
            Some(pos) => (&line[..pos], line[pos..].trim()),
            None => (line, ""),
        };
        let args: Vec<String> = rest
            .replace("->", ",")
            .split(',')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        let arg = |i: usize| -> Result<&str> {
            args.get(i)
                .map(|s| s.as_str())
                .ok_or_else(|| Error::format("micro-ir", format!("line {line_no}: missing operand")))
        };

        let pinstr = match mnemonic {
            "load_input" => PInstr::Ready(Instr::LoadInput {
                dst: parse_reg(arg(0)?, line_no)?,
                index: parse_operand(arg(1)?, line_no)?,
            }),
            "const" => {
                let v = match parse_operand(arg(1)?, line_no)? {
                    Operand::Imm(v) => v,
                    Operand::Reg(_) => return Err(err("const takes an immediate".into())),
                };
                PInstr::Ready(Instr::Const { dst: parse_reg(arg(0)?, line_no)?, value: v })
            }
            "add" | "sub" | "mul" | "div" | "shl" | "shr" | "and" | "or" => {
                let op = match mnemonic {
                    "add" => BinOp::Add,
                    "sub" => BinOp::Sub,
                    "mul" => BinOp::Mul,
                    "div" => BinOp::Div,
                    "shl" => BinOp::Shl,
                    "shr" => BinOp::Shr,
                    "and" => BinOp::And,
                    _ => BinOp::Or,
                };
                PInstr::Ready(Instr::Bin {
                    op,
                    dst: parse_reg(arg(0)?, line_no)?,
                    a: parse_operand(arg(1)?, line_no)?,
                    b: parse_operand(arg(2)?, line_no)?,
                })
            }
            "load_mem" => PInstr::Ready(Instr::LoadMem {
                dst: parse_reg(arg(0)?, line_no)?,
                addr: parse_operand(arg(1)?, line_no)?,
            }),
            "store_mem" => PInstr::Ready(Instr::StoreMem {
                addr: parse_operand(arg(0)?, line_no)?,
                src: parse_operand(arg(1)?, line_no)?,
            }),
            "cmp_branch" => {
                let mut parts = rest.split_whitespace();
                let pred = parts
                    .next()
                    .and_then(Pred::parse)
                    .ok_or_else(|| err("bad predicate".into()))?;
                let tail = parts.collect::<Vec<_>>().join(" ");
                let toks: Vec<String> = tail
                    .split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect();
                if toks.len() < 4 {
                    return Err(err("cmp_branch needs a, b, [sink=N,] taken, not_taken".into()));
                }
                let a = parse_operand(&toks[0], line_no)?;
                let b = parse_operand(&toks[1], line_no)?;
                let (sink, rest_toks) = if let Some(s) = toks[2].strip_prefix("sink=") {
                    let sid: SinkId = s
                        .parse()
                        .map_err(|_| err(format!("bad sink reference '{}'", toks[2])))?;
                    (Some(sid), &toks[3..])
                } else {
                    (None, &toks[2..])
                };
                if rest_toks.len() != 2 {
                    return Err(err("cmp_branch needs exactly two targets".into()));
                }
                PInstr::Branch(PendingBranch {
                    pred,
                    a,
                    b,
                    sink,
                    taken: rest_toks[0].clone(),
                    not_taken: rest_toks[1].clone(),
                    line_no,
                })
            }
            "jmp" => PInstr::Jmp { target: arg(0)?.to_string(), line_no },
            "call_ext" => {
                let mut parts = rest.split_whitespace();
                let func = parts
                    .next()
                    .and_then(ExtFn::parse)
                    .ok_or_else(|| err("unknown external function".into()))?;
                let tail = parts.collect::<Vec<_>>().join(" ");
                let toks: Vec<String> = tail
                    .replace("->", ",")
                    .split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect();
                if toks.len() != 3 {
                    return Err(err("call_ext needs two args and a destination".into()));
                }
                PInstr::Ready(Instr::CallExt {
                    func,
                    a: parse_operand(&toks[0], line_no)?,
                    b: parse_operand(&toks[1], line_no)?,
                    dst: parse_reg(&toks[2], line_no)?,
                })
            }
            "sink_scalar" => {
                let sid: SinkId = arg(0)?
                    .parse()
                    .map_err(|_| err("bad sink reference".into()))?;
                PInstr::Ready(Instr::SinkScalar {
                    sink: sid,
                    value: parse_operand(arg(1)?, line_no)?,
                })
            }
            "halt" => PInstr::Ready(Instr::Halt),
            other => return Err(err(format!("unknown mnemonic '{other}'"))),
        };
        instrs.push(pinstr);
    }

    let resolve = |label: &str, line_no: usize| -> Result<u32> {
        labels.get(label).map(|&i| i as u32).ok_or_else(|| {
            Error::format("micro-ir", format!("line {line_no}: undefined label '{label}'"))
        })
    };
    let mut linked = Vec::with_capacity(instrs.len());
    for p in instrs {
        linked.push(match p {
            PInstr::Ready(i) => i,
            PInstr::Branch(pb) => Instr::CmpBranch {
                pred: pb.pred,
                a: pb.a,
                b: pb.b,
                sink: pb.sink,
                taken: resolve(&pb.taken, pb.line_no)?,
                not_taken: resolve(&pb.not_taken, pb.line_no)?,
            },
            PInstr::Jmp { target, line_no } => Instr::Jmp { target: resolve(&target, line_no)? },
        });
    }

    let sink_vec: Vec<SinkDecl> = {
        let count = sinks.len();
        let mut v = Vec::with_capacity(count);
        for i in 0..count {
            v.push(sinks.remove(&i).ok_or_else(|| {
                Error::format("micro-ir", format!("sink indices not contiguous at {i}"))
            })?);
        }
        v
    };
    MicroProgram::link(name, input_len, mem_size, reg_count, linked, sink_vec)
}
