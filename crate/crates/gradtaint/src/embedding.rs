//! Trace datasets and the neural-program fitting pipeline.
//!
//! A [`TraceDataset`] holds raw execution observations: input bytes and,
//! per declared sink, either the compared operand pair (branch sinks) or
//! the recorded value (scalar sinks), with `None` for sinks the run never
//! reached. Raw operands rather than outcomes are stored so any predicate
//! convention can be re-derived after the fact.
//!
//! Training consumes a *normalized* dataset: branch sinks collapse to their
//! predicate outcome bit (unreached counts as 0), scalar sinks are min-max
//! scaled over the dataset, and inputs are scaled to `[0,1]` by 1/255.
//! Normalizing twice is an error, as is min-max over a constant sink —
//! constant sinks carry no signal and must be pruned first.
//!
//! [`fit_neural_program`] splits 5:1 with a seeded shuffle, prunes binary
//! sinks that are single-class within the training split, trains the dense
//! net with cross-entropy on binary outputs and squared error on scalar
//! outputs, and reports per-sink metrics. The returned [`NeuralProgram`]
//! round-trips through a checkpoint file plus a JSON sidecar carrying sink
//! identity and normalization state.

use crate::error::{Error, Result};
use crate::ir::{MicroProgram, Pred, SinkKind, SinkValue, Vm};
use crate::nn::{self, DenseNet, HiddenActivation, Loss, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::path::Path;

/// Sink identity as carried by datasets and models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkSpec {
    pub id: String,
    pub kind: SinkKind,
}

impl SinkSpec {
    pub fn from_program(prog: &MicroProgram) -> Vec<SinkSpec> {
        prog.sinks
            .iter()
            .map(|d| SinkSpec { id: d.id.clone(), kind: d.kind })
            .collect()
    }
}

/// Per-sink normalization state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SinkNorm {
    Binary,
    MinMax { y_min: f64, y_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
struct Sample {
    input: Vec<u8>,
    raw: Vec<Option<SinkValue>>,
}

/// Execution observations for one target program.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDataset {
    m: usize,
    sinks: Vec<SinkSpec>,
    samples: Vec<Sample>,
    norm: Option<Vec<SinkNorm>>,
}

/// Predicate outcome of a recorded branch-sink operand pair.
pub fn normalize_branch_sink(left: u64, right: u64, pred: Pred) -> f64 {
    if pred.eval(left, right) {
        1.0
    } else {
        0.0
    }
}

/// Standard min-max scaling; a degenerate range is a contract error (the
/// sink is constant and must be pruned instead).
pub fn minmax_normalize(y: f64, y_min: f64, y_max: f64) -> Result<f64> {
    if !(y_min < y_max) {
        return Err(Error::contract(format!(
            "min-max normalization over a constant range [{y_min}, {y_max}]"
        )));
    }
    Ok((y - y_min) / (y_max - y_min))
}

/// Byte-to-real input scaling: each byte divided by 255.
pub fn scale_input(bytes: &[u8]) -> Vec<f64> {
    bytes.iter().map(|&b| f64::from(b) / 255.0).collect()
}

impl TraceDataset {
    pub fn new(m: usize, sinks: Vec<SinkSpec>) -> Result<TraceDataset> {
        let mut ids: Vec<&str> = sinks.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != sinks.len() {
            return Err(Error::contract("duplicate sink ids in dataset"));
        }
        Ok(TraceDataset { m, sinks, samples: Vec::new(), norm: None })
    }

    /// Runs `program` on every input and records raw sink values.
    pub fn collect<I>(program: &MicroProgram, inputs: I) -> Result<TraceDataset>
    where
        I: IntoIterator<Item = Vec<u8>>,
    {
        let mut ds = TraceDataset::new(program.input_len, SinkSpec::from_program(program))?;
        let mut vm = Vm::new();
        for input in inputs {
            let raw = vm.run_sinks(program, &input)?;
            ds.push_sample(input, raw)?;
        }
        Ok(ds)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sinks(&self) -> &[SinkSpec] {
        &self.sinks
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.norm.is_some()
    }

    pub fn normalization(&self) -> Option<&[SinkNorm]> {
        self.norm.as_deref()
    }

    pub fn input(&self, idx: usize) -> &[u8] {
        &self.samples[idx].input
    }

    pub fn raw_sink(&self, sample: usize, sink: usize) -> Option<SinkValue> {
        self.samples[sample].raw[sink]
    }

    pub fn sink_index(&self, id: &str) -> Option<usize> {
        self.sinks.iter().position(|s| s.id == id)
    }

    /// New raw dataset holding only the given sample rows (same sinks).
    /// Normalization does not transfer: a subset's scalar ranges are its
    /// own business, so normalized datasets refuse.
    pub fn subset(&self, rows: &[usize]) -> Result<TraceDataset> {
        if self.norm.is_some() {
            return Err(Error::contract("subset a raw dataset, then normalize the subset"));
        }
        let samples = rows.iter().map(|&r| self.samples[r].clone()).collect();
        Ok(TraceDataset { m: self.m, sinks: self.sinks.clone(), samples, norm: None })
    }

    pub fn push_sample(&mut self, input: Vec<u8>, raw: Vec<Option<SinkValue>>) -> Result<()> {
        if self.norm.is_some() {
            return Err(Error::contract("cannot extend a normalized dataset"));
        }
        if input.len() != self.m {
            return Err(Error::contract(format!(
                "sample input length {} does not match m={}",
                input.len(),
                self.m
            )));
        }
        if raw.len() != self.sinks.len() {
            return Err(Error::contract(format!(
                "sample has {} sink values for {} sinks",
                raw.len(),
                self.sinks.len()
            )));
        }
        for (spec, value) in self.sinks.iter().zip(&raw) {
            let ok = match (spec.kind, value) {
                (_, None) => true,
                (SinkKind::Branch(_), Some(SinkValue::Branch { .. })) => true,
                (SinkKind::Scalar, Some(SinkValue::Scalar(_))) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::contract(format!(
                    "sink {} recorded with the wrong value kind",
                    spec.id
                )));
            }
        }
        self.samples.push(Sample { input, raw });
        Ok(())
    }

    /// Drops sinks whose normalized value would be the same for every
    /// sample (branch outcome constant, or scalar with a single observed
    /// value). Returns the removed sink ids.
    pub fn prune_constant_sinks(&mut self) -> Result<Vec<String>> {
        if self.norm.is_some() {
            return Err(Error::contract("prune before normalizing, not after"));
        }
        let mut removed = Vec::new();
        let mut keep_cols = Vec::new();
        for (i, spec) in self.sinks.iter().enumerate() {
            let constant = match spec.kind {
                SinkKind::Branch(pred) => {
                    let mut seen = [false; 2];
                    for s in &self.samples {
                        let bit = SinkValue::branch_outcome(pred, s.raw[i]);
                        seen[usize::from(bit)] = true;
                    }
                    !(seen[0] && seen[1])
                }
                SinkKind::Scalar => {
                    let mut observed = self.samples.iter().filter_map(|s| match s.raw[i] {
                        Some(SinkValue::Scalar(v)) => Some(v),
                        _ => None,
                    });
                    match observed.next() {
                        None => true,
                        Some(first) => observed.all(|v| v == first),
                    }
                }
            };
            if constant {
                removed.push(spec.id.clone());
            } else {
                keep_cols.push(i);
            }
        }
        if removed.is_empty() {
            return Ok(removed);
        }
        self.sinks = keep_cols.iter().map(|&i| self.sinks[i].clone()).collect();
        for s in &mut self.samples {
            s.raw = keep_cols.iter().map(|&i| s.raw[i]).collect();
        }
        Ok(removed)
    }

    /// Fixes normalization state: branch sinks become outcome bits and
    /// scalar sinks record their observed min-max range. Errors on an
    /// already-normalized dataset (idempotence is a bug, not a re-scale),
    /// on an empty one, and on constant scalar sinks.
    pub fn normalize(&mut self) -> Result<()> {
        if self.norm.is_some() {
            return Err(Error::contract("dataset is already normalized"));
        }
        if self.samples.is_empty() {
            return Err(Error::contract("cannot normalize an empty dataset"));
        }
        let mut norm = Vec::with_capacity(self.sinks.len());
        for (i, spec) in self.sinks.iter().enumerate() {
            match spec.kind {
                SinkKind::Branch(_) => norm.push(SinkNorm::Binary),
                SinkKind::Scalar => {
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    let mut seen = false;
                    for s in &self.samples {
                        if let Some(SinkValue::Scalar(v)) = s.raw[i] {
                            let v = v as f64;
                            lo = lo.min(v);
                            hi = hi.max(v);
                            seen = true;
                        }
                    }
                    if !seen {
                        return Err(Error::contract(format!(
                            "scalar sink {} was never reached; prune it first",
                            spec.id
                        )));
                    }
                    if !(lo < hi) {
                        return Err(Error::contract(format!(
                            "scalar sink {} is constant ({lo}); prune it first",
                            spec.id
                        )));
                    }
                    norm.push(SinkNorm::MinMax { y_min: lo, y_max: hi });
                }
            }
        }
        self.norm = Some(norm);
        Ok(())
    }

    /// Normalized target for one (sample, sink) cell. Unreached sinks
    /// normalize to 0: an untaken branch and an unreached one look the same
    /// to the predicate, and scalar sinks default to the range floor.
    fn target_cell(&self, sample: usize, sink: usize, norm: &[SinkNorm]) -> f64 {
        let raw = self.samples[sample].raw[sink];
        match (self.sinks[sink].kind, norm[sink]) {
            (SinkKind::Branch(pred), SinkNorm::Binary) => {
                if SinkValue::branch_outcome(pred, raw) {
                    1.0
                } else {
                    0.0
                }
            }
            (SinkKind::Scalar, SinkNorm::MinMax { y_min, y_max }) => match raw {
                Some(SinkValue::Scalar(v)) => {
                    minmax_normalize(v as f64, y_min, y_max).expect("validated at normalize()")
                }
                _ => 0.0,
            },
            _ => unreachable!("normalization state disagrees with sink kind"),
        }
    }

    /// Row-major normalized target matrix (`len x sinks`).
    pub fn normalized_targets(&self) -> Result<Vec<f64>> {
        let norm = self
            .norm
            .as_deref()
            .ok_or_else(|| Error::contract("dataset is not normalized"))?;
        let n = self.sinks.len();
        let mut out = Vec::with_capacity(self.len() * n);
        for s in 0..self.len() {
            for i in 0..n {
                let t = self.target_cell(s, i, norm);
                debug_assert!((0.0..=1.0).contains(&t));
                out.push(t);
            }
        }
        Ok(out)
    }

    /// Row-major scaled input matrix (`len x m`).
    pub fn scaled_inputs(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.m);
        for s in &self.samples {
            out.extend(s.input.iter().map(|&b| f64::from(b) / 255.0));
        }
        out
    }

    /// Deterministic 5:1 train/test split: a seeded shuffle of the sample
    /// indices, last sixth (at least one sample) held out.
    pub fn split_indices(&self, rng_seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if self.len() < 2 {
            return Err(Error::contract("need at least 2 samples to split"));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x9e37_79b9_7f4a_7c15);
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let test_count = (self.len() / 6).max(1);
        let (train, test) = order.split_at(self.len() - test_count);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, emit_dataset(self))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TraceDataset> {
        let text = std::fs::read_to_string(path)?;
        parse_dataset(&text)
    }
}

fn hex_encode(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn hex_decode(s: &str) -> Result<Vec<u8>> {
    if s.len() % 2 != 0 || !s.bytes().all(|c| c.is_ascii_hexdigit()) {
        return Err(Error::format("dataset", format!("bad hex input string: {s:?}")));
    }
    (0..s.len() / 2)
        .map(|i| {
            u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::format("dataset", format!("bad hex byte: {e}")))
        })
        .collect()
}

fn sink_spec_json(spec: &SinkSpec) -> Value {
    match spec.kind {
        SinkKind::Branch(pred) => json!({
            "id": spec.id,
            "kind": "branch",
            "predicate": pred.name(),
        }),
        SinkKind::Scalar => json!({ "id": spec.id, "kind": "scalar" }),
    }
}

fn sink_spec_from_json(v: &Value) -> Result<SinkSpec> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::format("dataset", "sink spec is not an object"))?;
    let id = obj
        .get("id")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::format("dataset", "sink spec missing id"))?
        .to_string();
    let kind = match obj.get("kind").and_then(Value::as_str) {
        Some("scalar") => SinkKind::Scalar,
        Some("branch") => {
            let pname = obj
                .get("predicate")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::format("dataset", format!("branch sink {id} missing predicate")))?;
            let pred = Pred::parse(pname)
                .ok_or_else(|| Error::format("dataset", format!("unknown predicate {pname:?}")))?;
            SinkKind::Branch(pred)
        }
        other => {
            return Err(Error::format("dataset", format!("unknown sink kind {other:?}")));
        }
    };
    Ok(SinkSpec { id, kind })
}

fn norm_json(norm: &SinkNorm) -> Value {
    match norm {
        SinkNorm::Binary => Value::String("binary".into()),
        SinkNorm::MinMax { y_min, y_max } => json!({ "y_min": y_min, "y_max": y_max }),
    }
}

fn norm_from_json(v: &Value) -> Result<SinkNorm> {
    match v {
        Value::String(s) if s == "binary" => Ok(SinkNorm::Binary),
        Value::Object(obj) => {
            let y_min = obj
                .get("y_min")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::format("dataset", "normalization missing y_min"))?;
            let y_max = obj
                .get("y_max")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::format("dataset", "normalization missing y_max"))?;
            Ok(SinkNorm::MinMax { y_min, y_max })
        }
        other => Err(Error::format("dataset", format!("bad normalization entry: {other}"))),
    }
}

/// Newline-delimited JSON: one header object, then one object per sample.
pub fn emit_dataset(ds: &TraceDataset) -> String {
    let mut header = Map::new();
    header.insert("m".into(), json!(ds.m));
    header.insert(
        "sinks".into(),
        Value::Array(ds.sinks.iter().map(sink_spec_json).collect()),
    );
    if let Some(norm) = &ds.norm {
        header.insert(
            "normalization".into(),
            Value::Array(norm.iter().map(norm_json).collect()),
        );
    }
    let mut out = Value::Object(header).to_string();
    out.push('\n');
    for s in &ds.samples {
        let sinks: Vec<Value> = s
            .raw
            .iter()
            .map(|v| match v {
                None => Value::Null,
                Some(SinkValue::Branch { left, right }) => json!([left, right]),
                Some(SinkValue::Scalar(v)) => json!(v),
            })
            .collect();
        out.push_str(&json!({ "input": hex_encode(&s.input), "sinks": sinks }).to_string());
        out.push('\n');
    }
    out
}

/// Parses the NDJSON dataset format. Inverse of [`emit_dataset`]:
/// `emit(parse(text)) == text` for canonical emissions.
pub fn parse_dataset(text: &str) -> Result<TraceDataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines
        .next()
        .ok_or_else(|| Error::format("dataset", "empty dataset file"))?;
    let header: Value = serde_json::from_str(header_line)
        .map_err(|e| Error::format("dataset", format!("bad header: {e}")))?;
    let m = header
        .get("m")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::format("dataset", "header missing m"))? as usize;
    let sink_vals = header
        .get("sinks")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::format("dataset", "header missing sinks"))?;
    let sinks: Vec<SinkSpec> = sink_vals.iter().map(sink_spec_from_json).collect::<Result<_>>()?;
    let norm = match header.get("normalization") {
        None => None,
        Some(Value::Array(arr)) => {
            if arr.len() != sinks.len() {
                return Err(Error::format(
                    "dataset",
                    "normalization entry count does not match sinks",
                ));
            }
            Some(arr.iter().map(norm_from_json).collect::<Result<Vec<_>>>()?)
        }
        Some(other) => {
            return Err(Error::format("dataset", format!("bad normalization field: {other}")));
        }
    };

    let mut ds = TraceDataset::new(m, sinks)?;
    for (lineno, line) in lines.enumerate() {
        let rec: Value = serde_json::from_str(line)
            .map_err(|e| Error::format("dataset", format!("record {}: {e}", lineno + 2)))?;
        let input = hex_decode(
            rec.get("input")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::format("dataset", format!("record {}: missing input", lineno + 2)))?,
        )?;
        let sink_arr = rec
            .get("sinks")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::format("dataset", format!("record {}: missing sinks", lineno + 2)))?;
        let mut raw = Vec::with_capacity(sink_arr.len());
        for (i, v) in sink_arr.iter().enumerate() {
            let parsed = match v {
                Value::Null => None,
                Value::Array(pair) => {
                    if pair.len() != 2 {
                        return Err(Error::format(
                            "dataset",
                            format!("record {}: operand pair of length {}", lineno + 2, pair.len()),
                        ));
                    }
                    let left = pair[0].as_u64().ok_or_else(|| {
                        Error::format("dataset", format!("record {}: bad left operand", lineno + 2))
                    })?;
                    let right = pair[1].as_u64().ok_or_else(|| {
                        Error::format("dataset", format!("record {}: bad right operand", lineno + 2))
                    })?;
                    Some(SinkValue::Branch { left, right })
                }
                v => {
                    let val = v.as_u64().ok_or_else(|| {
                        Error::format("dataset", format!("record {}: bad sink {} value {v}", lineno + 2, i))
                    })?;
                    Some(SinkValue::Scalar(val))
                }
            };
            raw.push(parsed);
        }
        ds.push_sample(input, raw)?;
    }
    ds.norm = norm;
    Ok(ds)
}

/// Hidden-layer mode: `Mlp` is the standard ReLU net, `Logistic` removes
/// the nonlinearity so the whole model is linear-in-input before the output
/// sigmoid (used to show nonlinear capacity matters).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Mlp,
    Logistic,
}

/// A trained surrogate of one target program: the net plus the sink
/// identities and normalization its outputs are expressed in.
#[derive(Debug, Clone)]
pub struct NeuralProgram {
    pub net: DenseNet,
    pub sinks: Vec<SinkSpec>,
    pub norm: Vec<SinkNorm>,
    pub target_name: String,
}

impl NeuralProgram {
    pub fn sink_index(&self, id: &str) -> Option<usize> {
        self.sinks.iter().position(|s| s.id == id)
    }

    /// Model outputs for raw input bytes.
    pub fn forward_bytes(&self, input: &[u8]) -> Vec<f64> {
        self.net.forward(&scale_input(input))
    }

    /// Saves the checkpoint and a `.meta.json` sidecar next to it.
    pub fn save(&self, checkpoint: &Path) -> Result<()> {
        self.net.save(checkpoint)?;
        let meta = json!({
            "target": self.target_name,
            "sinks": Value::Array(self.sinks.iter().map(sink_spec_json).collect()),
            "normalization": Value::Array(self.norm.iter().map(norm_json).collect()),
        });
        std::fs::write(meta_path(checkpoint), format!("{meta}\n"))?;
        Ok(())
    }

    pub fn load(checkpoint: &Path) -> Result<NeuralProgram> {
        let net = DenseNet::load(checkpoint)?;
        let text = std::fs::read_to_string(meta_path(checkpoint))?;
        let meta: Value = serde_json::from_str(&text)
            .map_err(|e| Error::format("model meta", e.to_string()))?;
        let target_name = meta
            .get("target")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::format("model meta", "missing target"))?
            .to_string();
        let sinks = meta
            .get("sinks")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::format("model meta", "missing sinks"))?
            .iter()
            .map(sink_spec_from_json)
            .collect::<Result<Vec<_>>>()?;
        let norm = meta
            .get("normalization")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::format("model meta", "missing normalization"))?
            .iter()
            .map(norm_from_json)
            .collect::<Result<Vec<_>>>()?;
        if sinks.len() != net.output_dim() || norm.len() != sinks.len() {
            return Err(Error::format(
                "model meta",
                format!(
                    "sidecar lists {} sinks / {} normalization entries for a {}-output net",
                    sinks.len(),
                    norm.len(),
                    net.output_dim()
                ),
            ));
        }
        Ok(NeuralProgram { net, sinks, norm, target_name })
    }
}

fn meta_path(checkpoint: &Path) -> std::path::PathBuf {
    let mut os = checkpoint.as_os_str().to_owned();
    os.push(".meta.json");
    std::path::PathBuf::from(os)
}

/// Per-sink evaluation: accuracy at threshold 0.5 for binary sinks, mean
/// squared error for scalar sinks (the other slot is `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct SinkEval {
    pub accuracy: Vec<Option<f64>>,
    pub mse: Vec<Option<f64>>,
}

/// Fit summary. `pruned_sink_ids` lists binary sinks dropped because the
/// training split contained only one class.
#[derive(Debug, Clone)]
pub struct FitMetrics {
    pub pruned_sink_ids: Vec<String>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub epoch_losses: Vec<f64>,
    pub train_eval: SinkEval,
    pub test_eval: SinkEval,
    pub test_accuracy: Option<f64>,
    pub test_mse: Option<f64>,
}

/// Evaluates a model against dataset rows (by sample index): accuracy at
/// 0.5 for binary sinks, MSE for scalar sinks. The dataset must contain
/// every model sink and be normalized identically.
pub fn evaluate_on(np: &NeuralProgram, ds: &TraceDataset, rows: &[usize]) -> Result<SinkEval> {
    let norm = ds
        .normalization()
        .ok_or_else(|| Error::contract("evaluation needs a normalized dataset"))?;
    if rows.is_empty() {
        return Err(Error::contract("evaluation over an empty row set"));
    }
    let cols: Vec<usize> = np
        .sinks
        .iter()
        .map(|s| {
            ds.sink_index(&s.id)
                .ok_or_else(|| Error::contract(format!("dataset lacks sink {}", s.id)))
        })
        .collect::<Result<_>>()?;
    for (model_i, &col) in cols.iter().enumerate() {
        if np.norm[model_i] != norm[col] {
            return Err(Error::contract(format!(
                "normalization mismatch for sink {}",
                np.sinks[model_i].id
            )));
        }
    }
    let n = np.sinks.len();
    let mut correct = vec![0usize; n];
    let mut sqerr = vec![0.0f64; n];
    for &row in rows {
        let y = np.forward_bytes(ds.input(row));
        for (i, &col) in cols.iter().enumerate() {
            let t = ds.target_cell(row, col, norm);
            match np.norm[i] {
                SinkNorm::Binary => {
                    let pred = y[i] >= 0.5;
                    if pred == (t >= 0.5) {
                        correct[i] += 1;
                    }
                }
                SinkNorm::MinMax { .. } => {
                    let d = y[i] - t;
                    sqerr[i] += d * d;
                }
            }
        }
    }
    let total = rows.len() as f64;
    let accuracy = (0..n)
        .map(|i| match np.norm[i] {
            SinkNorm::Binary => Some(correct[i] as f64 / total),
            SinkNorm::MinMax { .. } => None,
        })
        .collect();
    let mse = (0..n)
        .map(|i| match np.norm[i] {
            SinkNorm::Binary => None,
            SinkNorm::MinMax { .. } => Some(sqerr[i] / total),
        })
        .collect();
    Ok(SinkEval { accuracy, mse })
}

fn mean_of(vals: &[Option<f64>]) -> Option<f64> {
    let picked: Vec<f64> = vals.iter().flatten().copied().collect();
    if picked.is_empty() {
        None
    } else {
        Some(picked.iter().sum::<f64>() / picked.len() as f64)
    }
}

/// Trains a surrogate for the dataset's target. See the module docs for
/// the full pipeline; `cfg.loss` is ignored in favor of per-sink selection.
pub fn fit_neural_program(
    ds: &TraceDataset,
    cfg: &TrainConfig,
    hidden_dim: usize,
    mode: FitMode,
    target_name: &str,
) -> Result<(NeuralProgram, FitMetrics)> {
    let norm_all = ds
        .normalization()
        .ok_or_else(|| Error::contract("fit requires a normalized dataset"))?
        .to_vec();
    if ds.len() < 2 {
        return Err(Error::contract("fit requires at least 2 samples"));
    }
    let (train_idx, test_idx) = ds.split_indices(cfg.rng_seed)?;
    let targets_all = ds.normalized_targets()?;
    let n_all = ds.sinks().len();

    // Binary sinks must show both classes in the training split.
    let mut keep = Vec::new();
    let mut pruned_sink_ids = Vec::new();
    for i in 0..n_all {
        match norm_all[i] {
            SinkNorm::Binary => {
                let mut seen = [false; 2];
                for &row in &train_idx {
                    let bit = targets_all[row * n_all + i] >= 0.5;
                    seen[usize::from(bit)] = true;
                }
                if seen[0] && seen[1] {
                    keep.push(i);
                } else {
                    pruned_sink_ids.push(ds.sinks()[i].id.clone());
                }
            }
            SinkNorm::MinMax { .. } => keep.push(i),
        }
    }
    if keep.is_empty() {
        return Err(Error::contract(
            "no sinks left after single-class pruning; corpus does not exercise the target",
        ));
    }

    let n = keep.len();
    let losses: Vec<Loss> = keep
        .iter()
        .map(|&i| match norm_all[i] {
            SinkNorm::Binary => Loss::CrossEntropy,
            SinkNorm::MinMax { .. } => Loss::MeanSquared,
        })
        .collect();

    let mut xs = Vec::with_capacity(train_idx.len() * ds.m());
    let mut ts = Vec::with_capacity(train_idx.len() * n);
    for &row in &train_idx {
        xs.extend(scale_input(ds.input(row)));
        ts.extend(keep.iter().map(|&i| targets_all[row * n_all + i]));
    }

    let activation = match mode {
        FitMode::Mlp => HiddenActivation::Relu,
        FitMode::Logistic => HiddenActivation::Identity,
    };
    let mut net = DenseNet::init(ds.m(), hidden_dim, n, activation, cfg.rng_seed)?;
    let report = nn::train_per_output(&mut net, &xs, &ts, train_idx.len(), cfg, &losses)?;

    let np = NeuralProgram {
        net,
        sinks: keep.iter().map(|&i| ds.sinks()[i].clone()).collect(),
        norm: keep.iter().map(|&i| norm_all[i]).collect(),
        target_name: target_name.to_string(),
    };
    let train_eval = evaluate_on(&np, ds, &train_idx)?;
    let test_eval = evaluate_on(&np, ds, &test_idx)?;
    let metrics = FitMetrics {
        pruned_sink_ids,
        train_samples: train_idx.len(),
        test_samples: test_idx.len(),
        epoch_losses: report.epoch_losses,
        test_accuracy: mean_of(&test_eval.accuracy),
        test_mse: mean_of(&test_eval.mse),
        train_eval,
        test_eval,
    };
    Ok((np, metrics))
}
