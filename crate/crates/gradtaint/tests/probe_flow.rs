use gradtaint::corpus::{generate_corpus, Strategy};
use gradtaint::embedding::{fit_neural_program, FitMode};
use gradtaint::floweval::*;
use gradtaint::fuzz::rule_dta_ranking;
use gradtaint::nn::TrainConfig;
use gradtaint::saliency::{hot_bytes_for_input, hot_count, HotByteSet};
use gradtaint::score::hot_byte_accuracy;
use gradtaint::targets::{build_target, FLOW_SUITE, XML_CLOSING_SINK, ZIP_SHIFT_SINK};
use std::time::Instant;

#[test]
fn probe_hot_accuracy() {
    for target in ["toy-elf", "toy-zip"] {
        let t = build_target(target).unwrap();
        let mask = t.ground_truth_mask();
        let fraction = 0.05;
        let k = hot_count(t.input_len(), fraction).unwrap();
        let (mut naccs, mut raccs) = (Vec::new(), Vec::new());
        for s in 0..5u64 {
            let t0 = Instant::now();
            let mut ds =
                generate_corpus(&t.program, &t.seed, 2000, s, Strategy::RandomFlip, 8).unwrap();
            let inputs: Vec<Vec<u8>> = (0..ds.len()).map(|i| ds.input(i).to_vec()).collect();
            ds.prune_constant_sinks().unwrap();
            ds.normalize().unwrap();
            let tc = TrainConfig { epochs: 24, rng_seed: s, ..Default::default() };
            let (np, _) = fit_neural_program(&ds, &tc, 64, FitMode::Mlp, target).unwrap();
            let hot = hot_bytes_for_input(&np, &t.seed, fraction).unwrap();
            let nacc = hot_byte_accuracy(&hot, &mask).unwrap().accuracy;
            let rr = rule_dta_ranking(&t.program, inputs.iter().map(|v| v.as_slice())).unwrap();
            let rhot = HotByteSet { indices: rr[..k].to_vec(), k };
            let racc = hot_byte_accuracy(&rhot, &mask).unwrap().accuracy;
            eprint!("[{target} s={s} n={nacc:.3} r={racc:.3} {:.1}s] ", t0.elapsed().as_secs_f64());
            naccs.push(nacc);
            raccs.push(racc);
        }
        naccs.sort_by(f64::total_cmp);
        raccs.sort_by(f64::total_cmp);
        eprintln!("| {target}: neural median {:.3} rule median {:.3}", naccs[2], raccs[2]);
    }
}

#[test]
fn probe_flow_recall() {
    let (mut agg_truth, mut agg_n, mut agg_r) = (0usize, 0usize, 0usize);
    for target in FLOW_SUITE {
        let t = build_target(target).unwrap();
        let t0 = Instant::now();
        let mut ds =
            generate_corpus(&t.program, &t.seed, 2000, 0, Strategy::RandomFlip, 8).unwrap();
        ds.prune_constant_sinks().unwrap();
        ds.normalize().unwrap();
        let tc = TrainConfig { epochs: 24, rng_seed: 0, ..Default::default() };
        let (np, fit) = fit_neural_program(&ds, &tc, 64, FitMode::Mlp, target).unwrap();
        let train_s = t0.elapsed().as_secs_f64();

        let test =
            generate_corpus(&t.program, &t.seed, 1000, 0x7e57, Strategy::RandomFlip, 8).unwrap();
        let inputs: Vec<Vec<u8>> = (0..test.len()).map(|i| test.input(i).to_vec()).collect();
        let t1 = Instant::now();
        let truth = ground_truth_flows(&t.program, &inputs).unwrap();
        let oracle_s = t1.elapsed().as_secs_f64();
        let neural = detect_flows_neural(&np, &inputs, FlowThreshold::default()).unwrap();
        let rule = detect_flows_rule_dta(&t.program, &inputs).unwrap();
        let nr = recall(&neural, &truth);
        let rr = recall(&rule, &truth);
        agg_truth += truth.len();
        agg_n += neural.intersection(&truth).count();
        agg_r += rule.intersection(&truth).count();
        eprintln!(
            "{target}: truth={} n_recall={nr:.4} r_recall={rr:.4} test_acc={:?} train={train_s:.1}s oracle={oracle_s:.1}s",
            truth.len(),
            fit.test_accuracy,
        );
        if target == "toy-xml" {
            let sink_truth: Vec<_> = flows_for_sink(&truth, XML_CLOSING_SINK).into_iter().collect();
            let sink_n: Vec<_> = flows_for_sink(&neural, XML_CLOSING_SINK).into_iter().collect();
            let hits = sink_n.iter().filter(|f| sink_truth.contains(f)).count();
            let sink_r = flows_for_sink(&rule, XML_CLOSING_SINK).len();
            eprintln!(
                "  xml closing sink: truth={} neural_hits={hits} recall={:.4} rule={sink_r}",
                sink_truth.len(),
                hits as f64 / sink_truth.len().max(1) as f64
            );
        }
        if target == "toy-zip" {
            let nf = sink_fpr(&neural, &truth, ZIP_SHIFT_SINK, inputs.len(), t.input_len()).unwrap();
            let rf = sink_fpr(&rule, &truth, ZIP_SHIFT_SINK, inputs.len(), t.input_len()).unwrap();
            eprintln!("  zip shift sink: neural_fpr={nf:.6} rule_fpr={rf:.6}");
        }
    }
    eprintln!(
        "aggregate: truth={agg_truth} neural={agg_n} ({:.4}) rule={agg_r} ({:.4})",
        agg_n as f64 / agg_truth as f64,
        agg_r as f64 / agg_truth as f64
    );
}

#[test]
fn probe_sweep_strata() {
    let t = build_target("vuln-len").unwrap();
    for (count, flip) in [(4000usize, 8usize), (4000, 12), (2400, 12)] {
        for s in [0u64, 1] {
            let ds =
                generate_corpus(&t.program, &t.seed, count, s, Strategy::RandomFlip, flip).unwrap();
            let n = t.program.sinks.len();
            // Samples whose deepest covered sink index stays below c, the
            // stratification rule.
            let deepest: Vec<Option<usize>> = (0..ds.len())
                .map(|row| (0..n).rev().find(|&i| ds.raw_sink(row, i).is_some()))
                .collect();
            let within: Vec<usize> = (1..=n)
                .map(|c| deepest.iter().filter(|d| d.is_none_or(|deep| deep < c)).count())
                .collect();
            eprintln!("count={count} flip={flip} s={s} within={within:?}");
        }
    }
}
