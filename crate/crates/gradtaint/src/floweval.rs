//! Flow-level scoring of the two detectors against an executable oracle.
//!
//! A flow is a claim: "on this input, this source byte influences this
//! sink." Ground truth comes from brute force — sweep every byte of every
//! test input through all 256 values and record which sinks move. The toy
//! targets are pure and small enough that this oracle is exact, which is
//! the point: both detectors can then be scored on recall and precision
//! with ordinary set arithmetic instead of sampled estimates.
//!
//! The sweep skips bytes the baseline run never reads. An unread byte
//! cannot influence anything: loads are driven by offsets computed from
//! bytes already read, so until byte j enters a load the execution of the
//! mutated input is step-identical to the baseline, and byte j never
//! enters a load because the baseline never reads it. This cuts the oracle
//! from `m × 255` runs per input to `|reads| × 255`.
//!
//! Branch sinks compare by outcome bit, with unreached counted as false —
//! the same collapse the training targets use. Scalar sinks compare raw
//! values (reachability included); every shipped scalar sink has a range
//! far below 10^9, so raw inequality coincides with a change in the
//! normalized value at any tolerance down to 1e-9.

use crate::embedding::{
    fit_neural_program, scale_input, FitMode, NeuralProgram, TraceDataset,
};
use crate::error::{Error, Result};
use crate::ir::{MicroProgram, SinkKind, SinkValue, Vm};
use crate::nn::TrainConfig;
use crate::ruledta;
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Default relative detection threshold: 5% of the strongest gradient in
/// the same (input, sink) saliency row.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 0.05;

/// One detected or true information flow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Flow {
    /// Index into the test-input list the flow set was built from.
    pub input_id: usize,
    pub byte_index: usize,
    pub sink_id: String,
}

impl Flow {
    pub fn new(input_id: usize, byte_index: usize, sink_id: impl Into<String>) -> Flow {
        Flow { input_id, byte_index, sink_id: sink_id.into() }
    }
}

/// Gradient-magnitude cutoff for the neural detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowThreshold {
    /// Fixed cutoff on |∂ŷ_i/∂x_j|. `Absolute(0.0)` degenerates to
    /// reporting every (byte, sink) pair.
    Absolute(f64),
    /// Cutoff at `fraction × max_j |∂ŷ_i/∂x_j|`, per (input, sink) row.
    /// Scale-free: reranking survives any rescaling of the model output.
    /// An all-zero row reports no flows (there is no scale to be relative
    /// to, and a gradient-free sink has no detectable sources).
    RelativeToMax(f64),
}

impl Default for FlowThreshold {
    fn default() -> Self {
        FlowThreshold::RelativeToMax(DEFAULT_RELATIVE_THRESHOLD)
    }
}

fn outcome_differs(kind: &SinkKind, a: Option<SinkValue>, b: Option<SinkValue>) -> bool {
    match kind {
        SinkKind::Branch(p) => {
            SinkValue::branch_outcome(*p, a) != SinkValue::branch_outcome(*p, b)
        }
        SinkKind::Scalar => a != b,
    }
}

/// Oracle flows for one input: every read byte is swept through all 256
/// values against every sink.
fn flows_for_input(
    program: &MicroProgram,
    vm: &mut Vm,
    input_id: usize,
    input: &[u8],
) -> Result<BTreeSet<Flow>> {
    let mut flows = BTreeSet::new();
    let n_sinks = program.sinks.len();
    let base = vm.run(program, input)?;
    let mut mutated = input.to_vec();
    for &jr in &base.reads {
        let j = jr as usize;
        let orig = mutated[j];
        // Per-sink "already flagged" mask so the value sweep can stop
        // early once every sink has moved.
        let mut flagged = vec![false; n_sinks];
        let mut remaining = n_sinks;
        for v in 0..=255u8 {
            if v == orig {
                continue;
            }
            mutated[j] = v;
            let vals = vm.run_sinks(program, &mutated)?;
            for (i, decl) in program.sinks.iter().enumerate() {
                if !flagged[i] && outcome_differs(&decl.kind, vals[i], base.sink_values[i]) {
                    flagged[i] = true;
                    remaining -= 1;
                    flows.insert(Flow::new(input_id, j, decl.id.clone()));
                }
            }
            if remaining == 0 {
                break;
            }
        }
        mutated[j] = orig;
    }
    Ok(flows)
}

/// Exhaustive flow oracle: `Flow(input, j, sink)` is true iff some value
/// of byte j changes the sink's outcome on that input.
pub fn ground_truth_flows(program: &MicroProgram, inputs: &[Vec<u8>]) -> Result<BTreeSet<Flow>> {
    ground_truth_flows_par(program, inputs, 1)
}

/// [`ground_truth_flows`] fanned out over at most `workers` threads. Inputs
/// are independent, so the union over any partition equals the sequential
/// result.
pub fn ground_truth_flows_par(
    program: &MicroProgram,
    inputs: &[Vec<u8>],
    workers: usize,
) -> Result<BTreeSet<Flow>> {
    let workers = workers.clamp(1, inputs.len().max(1));
    if workers == 1 {
        let mut vm = Vm::new();
        let mut flows = BTreeSet::new();
        for (input_id, input) in inputs.iter().enumerate() {
            flows.append(&mut flows_for_input(program, &mut vm, input_id, input)?);
        }
        return Ok(flows);
    }
    let chunk = inputs.len().div_ceil(workers);
    let parts: Vec<Result<BTreeSet<Flow>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = inputs
            .chunks(chunk)
            .enumerate()
            .map(|(c, slice)| {
                scope.spawn(move || {
                    let mut vm = Vm::new();
                    let mut flows = BTreeSet::new();
                    for (off, input) in slice.iter().enumerate() {
                        flows.append(&mut flows_for_input(program, &mut vm, c * chunk + off, input)?);
                    }
                    Ok(flows)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("oracle worker panicked")).collect()
    });
    let mut flows = BTreeSet::new();
    for part in parts {
        flows.append(&mut part?);
    }
    Ok(flows)
}

/// Gradient detector: flows are the Jacobian entries at each input whose
/// magnitude clears the threshold.
pub fn detect_flows_neural(
    np: &NeuralProgram,
    inputs: &[Vec<u8>],
    threshold: FlowThreshold,
) -> Result<BTreeSet<Flow>> {
    if let FlowThreshold::RelativeToMax(f) = threshold {
        if f <= 0.0 {
            return Err(Error::contract("relative flow threshold must be positive"));
        }
    }
    let mut flows = BTreeSet::new();
    for (input_id, input) in inputs.iter().enumerate() {
        if input.len() != np.net.input_dim() {
            return Err(Error::contract(format!(
                "input {input_id} has {} bytes, model expects {}",
                input.len(),
                np.net.input_dim()
            )));
        }
        // Logit-space rows: the sigmoid multiplies each row by a constant
        // σ'(z_i), so relative-to-max cuts are unchanged — except that σ'
        // underflows to exactly 0 on well-learned separable sinks, which
        // would silently erase their rows.
        let jac = np.net.input_jacobian_presigmoid(&scale_input(input));
        for (i, sink) in np.sinks.iter().enumerate() {
            let row = jac.row(i);
            let cut = match threshold {
                FlowThreshold::Absolute(t) => t,
                FlowThreshold::RelativeToMax(f) => {
                    let max = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if max == 0.0 {
                        continue;
                    }
                    f * max
                }
            };
            for (j, v) in row.iter().enumerate() {
                if v.abs() >= cut {
                    flows.insert(Flow::new(input_id, j, sink.id.clone()));
                }
            }
        }
    }
    Ok(flows)
}

/// Rule detector: flows are the tag-set memberships the propagator reports
/// at each sink. Unreached sinks carry empty tag sets and thus no flows.
pub fn detect_flows_rule_dta(
    program: &MicroProgram,
    inputs: &[Vec<u8>],
) -> Result<BTreeSet<Flow>> {
    let mut flows = BTreeSet::new();
    for (input_id, input) in inputs.iter().enumerate() {
        let outcome = ruledta::propagate(program, input)?;
        for (i, tags) in outcome.sink_tags.iter().enumerate() {
            for j in tags.iter() {
                flows.insert(Flow::new(input_id, j, program.sinks[i].id.clone()));
            }
        }
    }
    Ok(flows)
}

/// |detected ∩ truth| / |truth|; an empty truth set counts as fully
/// recalled.
pub fn recall(detected: &BTreeSet<Flow>, truth: &BTreeSet<Flow>) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    detected.intersection(truth).count() as f64 / truth.len() as f64
}

/// |detected ∩ truth| / |detected|; an empty detection is vacuously
/// precise.
pub fn precision(detected: &BTreeSet<Flow>, truth: &BTreeSet<Flow>) -> f64 {
    if detected.is_empty() {
        return 1.0;
    }
    detected.intersection(truth).count() as f64 / detected.len() as f64
}

/// False-positive rate for one sink over an input set: spurious flows
/// divided by the (input, byte) pairs that are truly non-flows for that
/// sink. `n_inputs` and `m` must describe the same input list both flow
/// sets were built from.
pub fn sink_fpr(
    detected: &BTreeSet<Flow>,
    truth: &BTreeSet<Flow>,
    sink_id: &str,
    n_inputs: usize,
    m: usize,
) -> Result<f64> {
    let det: BTreeSet<&Flow> = detected.iter().filter(|f| f.sink_id == sink_id).collect();
    let tru: BTreeSet<&Flow> = truth.iter().filter(|f| f.sink_id == sink_id).collect();
    let fp = det.difference(&tru).count();
    let negatives = n_inputs * m - tru.len();
    if negatives == 0 {
        return Err(Error::contract("every byte is a true flow; FPR undefined"));
    }
    Ok(fp as f64 / negatives as f64)
}

/// Flows of one sink.
pub fn flows_for_sink<'a>(flows: &'a BTreeSet<Flow>, sink_id: &str) -> BTreeSet<&'a Flow> {
    flows.iter().filter(|f| f.sink_id == sink_id).collect()
}

/// One point of the training-coverage sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepPoint {
    /// Distinct sinks reached anywhere in the stratum the model trained on.
    pub sinks_covered: usize,
    /// True flows the stratum's model detects on the common test set.
    pub flows_detected: usize,
}

/// Trains one model per coverage stratum and counts the oracle flows each
/// recovers on a shared unseen test set. Strata must be raw (the sweep
/// normalizes its own copies) and carry at least 50 samples each.
pub fn coverage_sweep(
    program: &MicroProgram,
    strata: &[TraceDataset],
    test_inputs: &[Vec<u8>],
    truth: &BTreeSet<Flow>,
    cfg: &TrainConfig,
    hidden_dim: usize,
    threshold: FlowThreshold,
) -> Result<Vec<SweepPoint>> {
    let mut points = Vec::with_capacity(strata.len());
    for ds in strata {
        if ds.len() < 50 {
            return Err(Error::contract(format!(
                "stratum has {} samples; need at least 50 to train",
                ds.len()
            )));
        }
        let covered = (0..ds.sinks().len())
            .filter(|&i| (0..ds.len()).any(|s| ds.raw_sink(s, i).is_some()))
            .count();
        let mut ds = ds.clone();
        ds.prune_constant_sinks()?;
        ds.normalize()?;
        let (np, _) = fit_neural_program(&ds, cfg, hidden_dim, FitMode::Mlp, &program.name)?;
        let detected = detect_flows_neural(&np, test_inputs, threshold)?;
        let hits = detected.intersection(truth).count();
        points.push(SweepPoint { sinks_covered: covered, flows_detected: hits });
    }
    Ok(points)
}

/// Flow set as CSV: `input_id,byte_index,sink_id,detector`.
pub fn flow_csv(flows: &BTreeSet<Flow>, detector: &str) -> String {
    let mut out = String::from("input_id,byte_index,sink_id,detector\n");
    for f in flows {
        writeln!(out, "{},{},{},{detector}", f.input_id, f.byte_index, f.sink_id)
            .expect("string write");
    }
    out
}

/// Per-target totals mirroring the comparison table: oracle flows and how
/// many of them each detector recovers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSummaryRow {
    pub target: String,
    pub total: usize,
    pub neural: usize,
    pub rule_dta: usize,
}

/// Summary table as CSV: `target,total,neural,rule_dta`.
pub fn flow_summary_csv(rows: &[FlowSummaryRow]) -> String {
    let mut out = String::from("target,total,neural,rule_dta\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.target, r.total, r.neural, r.rule_dta)
            .expect("string write");
    }
    out
}
