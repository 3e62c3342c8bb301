use gradtaint::corpus::{generate_corpus, Strategy};
use gradtaint::embedding::{fit_neural_program, FitMode};
use gradtaint::floweval::*;
use gradtaint::fuzz::rule_dta_ranking;
use gradtaint::nn::TrainConfig;
use gradtaint::saliency::{hot_bytes_for_input, hot_count, HotByteSet};
use gradtaint::score::hot_byte_accuracy;
use gradtaint::targets::{build_target, FLOW_SUITE, XML_CLOSING_SINK, ZIP_SHIFT_SINK};
use std::collections::BTreeSet;
use std::time::Instant;

#[test]
fn probe2_flow_configs() {
    let thresholds = [0.05, 0.03, 0.02];
    let configs = [(6000usize, 60usize, 96usize), (8000, 80, 128)];
    let (mut agg_truth, mut agg_rule) = (0usize, 0usize);
    let mut agg_n = vec![0usize; configs.len() * thresholds.len()];
    for name in FLOW_SUITE {
        let t = build_target(name).unwrap();
        let test = generate_corpus(&t.program, &t.seed, 1000, 0x7e57, Strategy::RandomFlip, 8)
            .unwrap();
        let inputs: Vec<Vec<u8>> = (0..test.len()).map(|i| test.input(i).to_vec()).collect();
        let t0 = Instant::now();
        let truth = ground_truth_flows(&t.program, &inputs).unwrap();
        let oracle_s = t0.elapsed().as_secs_f64();
        let rule = detect_flows_rule_dta(&t.program, &inputs).unwrap();
        let rule_hits = rule.intersection(&truth).count();
        agg_truth += truth.len();
        agg_rule += rule_hits;
        eprintln!(
            "{name}: truth={} rule_recall={:.4} oracle={oracle_s:.1}s",
            truth.len(),
            rule_hits as f64 / truth.len() as f64
        );
        if name == "toy-zip" {
            let tru = flows_for_sink(&truth, ZIP_SHIFT_SINK);
            let rul = flows_for_sink(&rule, ZIP_SHIFT_SINK);
            let superset = tru.is_subset(&rul);
            let rfpr = sink_fpr(&rule, &truth, ZIP_SHIFT_SINK, inputs.len(), 1024).unwrap();
            eprintln!(
                "  shift sink: truth={} rule={} superset={superset} ratio={:.2} rule_fpr={rfpr:.5}",
                tru.len(),
                rul.len(),
                rul.len() as f64 / tru.len() as f64
            );
        }
        for (ci, &(count, epochs, hidden)) in configs.iter().enumerate() {
            let t1 = Instant::now();
            let mut ds =
                generate_corpus(&t.program, &t.seed, count, 0, Strategy::RandomFlip, 8).unwrap();
            ds.prune_constant_sinks().unwrap();
            ds.normalize().unwrap();
            let tc = TrainConfig { epochs, rng_seed: 0, ..Default::default() };
            let (np, fit) = fit_neural_program(&ds, &tc, hidden, FitMode::Mlp, name).unwrap();
            let train_s = t1.elapsed().as_secs_f64();
            let kept: BTreeSet<&str> = np.sinks.iter().map(|s| s.id.as_str()).collect();
            let ceiling =
                truth.iter().filter(|f| kept.contains(f.sink_id.as_str())).count();
            eprint!(
                "  [{count}/{epochs}/{hidden}] acc={:.4} ceil={:.4} train={train_s:.0}s",
                fit.test_accuracy.unwrap_or(-1.0),
                ceiling as f64 / truth.len() as f64
            );
            for (ti, &f) in thresholds.iter().enumerate() {
                let det =
                    detect_flows_neural(&np, &inputs, FlowThreshold::RelativeToMax(f)).unwrap();
                let hits = det.intersection(&truth).count();
                agg_n[ci * thresholds.len() + ti] += hits;
                eprint!(" r{f}={:.4}", hits as f64 / truth.len() as f64);
                if name == "toy-zip" {
                    let nfpr =
                        sink_fpr(&det, &truth, ZIP_SHIFT_SINK, inputs.len(), 1024).unwrap();
                    eprint!(" zfpr={nfpr:.5}");
                }
                if name == "toy-xml" {
                    let tru = flows_for_sink(&truth, XML_CLOSING_SINK);
                    let det_s = flows_for_sink(&det, XML_CLOSING_SINK);
                    let h = det_s.iter().filter(|f| tru.contains(*f)).count();
                    eprint!(" xrec={:.4}", h as f64 / tru.len() as f64);
                }
            }
            eprintln!();
        }
    }
    eprintln!(
        "aggregate: truth={agg_truth} rule={:.4}",
        agg_rule as f64 / agg_truth as f64
    );
    for (ci, &(count, epochs, hidden)) in configs.iter().enumerate() {
        for (ti, &f) in thresholds.iter().enumerate() {
            eprintln!(
                "  [{count}/{epochs}/{hidden}] rel {f}: aggregate recall {:.4}",
                agg_n[ci * thresholds.len() + ti] as f64 / agg_truth as f64
            );
        }
    }
}

#[test]
fn probe2_hot_configs() {
    for name in ["toy-elf", "toy-zip"] {
        let t = build_target(name).unwrap();
        let mask = t.ground_truth_mask();
        let k = hot_count(t.input_len(), 0.05).unwrap();
        for flip in [8usize, 16] {
            for &(epochs, hidden) in &[(60usize, 96usize), (120, 96), (120, 128)] {
                let mut line = format!("{name} flip={flip} e={epochs} h={hidden}:");
                for s in 0..2u64 {
                    let mut ds =
                        generate_corpus(&t.program, &t.seed, 2000, s, Strategy::RandomFlip, flip)
                            .unwrap();
                    let inputs: Vec<Vec<u8>> =
                        (0..ds.len()).map(|i| ds.input(i).to_vec()).collect();
                    ds.prune_constant_sinks().unwrap();
                    ds.normalize().unwrap();
                    let tc = TrainConfig { epochs, rng_seed: s, ..Default::default() };
                    let (np, _) = fit_neural_program(&ds, &tc, hidden, FitMode::Mlp, name).unwrap();
                    let hot = hot_bytes_for_input(&np, &t.seed, 0.05).unwrap();
                    let nacc = hot_byte_accuracy(&hot, &mask).unwrap().accuracy;
                    let rr =
                        rule_dta_ranking(&t.program, inputs.iter().map(|v| v.as_slice())).unwrap();
                    let rhot = HotByteSet { indices: rr[..k].to_vec(), k };
                    let racc = hot_byte_accuracy(&rhot, &mask).unwrap().accuracy;
                    line.push_str(&format!(" [s={s} n={nacc:.3} r={racc:.3}]"));
                }
                eprintln!("{line}");
            }
        }
    }
}
