//! Hot-byte scoring against ground truth, and per-phase wall-clock
//! bookkeeping for the end-to-end pipeline.
//!
//! Accuracy here is precision-style: of the bytes the method nominated,
//! how many fall inside a ground-truth range. The false-positive rate
//! divides the misses by the bytes that are truly cold, so a 5% selection
//! on a 5%-hot input can score anywhere from (1.0, 0.0) to (0.0, ~0.053).

use crate::error::{Error, Result};
use crate::saliency::HotByteSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

/// Confusion counts and rates for one hot-byte prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotByteScore {
    pub tp: usize,
    pub fp: usize,
    pub accuracy: f64,
    pub fpr: f64,
}

/// Scores a hot-byte set against a ground-truth mask (`mask[j]` true for
/// hot bytes). `accuracy = tp/|hot|`, `fpr = fp/(m − |ground truth|)`.
pub fn hot_byte_accuracy(hot: &HotByteSet, mask: &[bool]) -> Result<HotByteScore> {
    if hot.indices.is_empty() {
        return Err(Error::contract("cannot score an empty hot-byte set"));
    }
    let m = mask.len();
    if let Some(&bad) = hot.indices.iter().find(|&&j| j >= m) {
        return Err(Error::contract(format!("hot byte {bad} outside input of length {m}")));
    }
    let gt = mask.iter().filter(|&&b| b).count();
    if gt == m {
        return Err(Error::contract("ground truth covers every byte; FPR undefined"));
    }
    let tp = hot.indices.iter().filter(|&&j| mask[j]).count();
    let fp = hot.indices.len() - tp;
    Ok(HotByteScore {
        tp,
        fp,
        accuracy: tp as f64 / hot.indices.len() as f64,
        fpr: fp as f64 / (m - gt) as f64,
    })
}

/// Score row as CSV (`target,method,hot,tp,fp,accuracy,fpr`).
pub fn score_csv(rows: &[(String, String, HotByteScore, usize)]) -> String {
    let mut out = String::from("target,method,hot,tp,fp,accuracy,fpr\n");
    for (target, method, s, hot) in rows {
        writeln!(out, "{target},{method},{hot},{},{},{},{}", s.tp, s.fp, s.accuracy, s.fpr)
            .expect("string write");
    }
    out
}

/// Pipeline phases whose wall-clock share the summary reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    DataCollection,
    Training,
    Saliency,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::DataCollection, Phase::Training, Phase::Saliency];

    pub fn name(self) -> &'static str {
        match self {
            Phase::DataCollection => "data_collection",
            Phase::Training => "training",
            Phase::Saliency => "saliency",
        }
    }

    fn index(self) -> usize {
        match self {
            Phase::DataCollection => 0,
            Phase::Training => 1,
            Phase::Saliency => 2,
        }
    }
}

/// Accumulates wall-clock time per phase. Phases may run repeatedly; their
/// durations add up. The sum of phases never exceeds total elapsed time
/// (phases are timed inside the timer's own lifetime).
#[derive(Debug)]
pub struct PhaseTimer {
    started: Instant,
    spent: [Duration; 3],
}

impl Default for PhaseTimer {
    fn default() -> Self {
        Self::new()
    }
}

impl PhaseTimer {
    pub fn new() -> PhaseTimer {
        PhaseTimer { started: Instant::now(), spent: [Duration::ZERO; 3] }
    }

    /// Runs `f`, attributing its wall-clock time to `phase`.
    pub fn time<T>(&mut self, phase: Phase, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.spent[phase.index()] += t0.elapsed();
        out
    }

    pub fn duration(&self, phase: Phase) -> Duration {
        self.spent[phase.index()]
    }

    pub fn total_phases(&self) -> Duration {
        self.spent.iter().sum()
    }

    pub fn total_elapsed(&self) -> Duration {
        self.started.elapsed()
    }

    /// Fraction of phase time spent in `phase`; 0 when nothing ran.
    pub fn share(&self, phase: Phase) -> f64 {
        let total = self.total_phases().as_secs_f64();
        if total == 0.0 {
            return 0.0;
        }
        self.duration(phase).as_secs_f64() / total
    }

    /// Timing table as CSV (`phase,seconds`), ending with a total row.
    pub fn csv(&self) -> String {
        let mut out = String::from("phase,seconds\n");
        for p in Phase::ALL {
            writeln!(out, "{},{:.3}", p.name(), self.duration(p).as_secs_f64())
                .expect("string write");
        }
        writeln!(out, "total,{:.3}", self.total_phases().as_secs_f64()).expect("string write");
        out
    }
}
