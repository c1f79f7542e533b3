//! Exit criteria for the simulator. Each test prints one PASS/FAIL line.
//!
//! The report lines go to stderr and are visible without `--nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use fedq::federation::{BitSchedule, DataSource, ExperimentConfig, PartitionScheme, RoundRecord, Simulation};
use fedq::harness::{compare_runs, render_metrics, MetricsFormat};
use fedq::math::{loss_and_grad, sgd_step, DenseTensor, ModelSpec, ParamSet, Sample};
use fedq::privacy::{compute_e0, laplace_noise, sensitivity, DpConfig, SensitivityInputs};
use fedq::quant::{dequantize, quantize, scale_factor};
use fedq::schedule::{client_importance, cosine_bits, round_bits, ImportanceInputs, ScheduleMode};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    // Straight to stderr so the line shows up even when output is captured.
    let _ = writeln!(std::io::stderr().lock(), "[{tag}] criterion {id}: {name} -- {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn base_config() -> ExperimentConfig {
    ExperimentConfig {
        model: ModelSpec::logistic(2, 3),
        schedule: BitSchedule {
            mode: ScheduleMode::Static { bits: 32 },
            b_max: 32,
            b_min: 8,
            lambda_h: 0.5,
        },
        dp: None,
        rounds: 10,
        num_clients: 10,
        clients_per_round: 5,
        local_epochs: 5,
        batch_size: 64,
        learning_rate: 0.1,
        seed: 0,
        partition: PartitionScheme::Dirichlet { alpha: 0.5 },
        data: DataSource::Synthetic {
            n_per_class: 200,
            test_per_class: 100,
            spread: 0.15,
        },
        eval_every: 10,
        parallel: true,
    }
}

fn total_bits(records: &[RoundRecord]) -> u64 {
    records.iter().map(|r| r.uplink_bits + r.downlink_bits).sum()
}

fn uplink_bits(records: &[RoundRecord]) -> u64 {
    records.iter().map(|r| r.uplink_bits).sum()
}

fn run(cfg: &ExperimentConfig) -> Vec<RoundRecord> {
    Simulation::new(cfg.clone()).unwrap().run().unwrap()
}

#[test]
fn criterion_1_cosine_communication_ratio() {
    let start = Instant::now();
    let mut cfg = base_config();
    cfg.model = ModelSpec::logistic(64, 10);
    cfg.data = DataSource::Synthetic {
        n_per_class: 20,
        test_per_class: 5,
        spread: 0.15,
    };
    cfg.rounds = 1000;
    cfg.num_clients = 50;
    cfg.clients_per_round = 5;
    cfg.local_epochs = 1;
    cfg.eval_every = 1000;
    cfg.schedule = BitSchedule {
        mode: ScheduleMode::Static { bits: 32 },
        b_max: 32,
        b_min: 8,
        lambda_h: 1.0,
    };
    let fp32 = run(&cfg);
    cfg.schedule.mode = ScheduleMode::Cosine;
    let cosine = run(&cfg);
    let ratio = total_bits(&cosine) as f64 / total_bits(&fp32) as f64;
    let summary = compare_runs(&fp32, &cosine);
    let elapsed = start.elapsed();
    report(
        1,
        "cosine(32->8) / static(32) total bits",
        (ratio - 0.625).abs() <= 0.005 && elapsed < Duration::from_secs(60),
        &format!(
            "ratio {ratio:.5} (target 0.625 +- 0.005), reduction {:.3}%, {:.1}s",
            100.0 * summary.reduction,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_2_dynamic_never_exceeds_cosine() {
    let mut cfg = base_config();
    cfg.rounds = 60;
    cfg.num_clients = 20;
    cfg.local_epochs = 1;
    cfg.eval_every = 60;
    cfg.schedule = BitSchedule {
        mode: ScheduleMode::Cosine,
        b_max: 32,
        b_min: 8,
        lambda_h: 0.5,
    };

    let mut all_ok = true;
    let mut lines = Vec::new();
    for seed in [0u64, 1, 2] {
        cfg.seed = seed;
        cfg.schedule.mode = ScheduleMode::Static { bits: 32 };
        let fp32 = uplink_bits(&run(&cfg));
        cfg.schedule.mode = ScheduleMode::Cosine;
        let cosine = uplink_bits(&run(&cfg));
        for lambda_h in [0.25, 0.5, 0.75, 1.0] {
            cfg.schedule.lambda_h = lambda_h;
            cfg.schedule.mode = ScheduleMode::Dynamic;
            let sim = Simulation::new(cfg.clone()).unwrap();
            let clients = sim.clients().to_vec();
            let mut sim = sim;
            let records = sim.run().unwrap();
            let dynamic = uplink_bits(&records);

            // Strictness is required when some selected client's importance
            // lowers its rounded bit-length below the cosine one.
            let horizon = cfg.rounds - 1;
            let lowered = records.iter().any(|r| {
                let n_max = r.selected.iter().map(|&c| clients[c].num_samples()).max().unwrap();
                r.selected.iter().any(|&c| {
                    let inp = ImportanceInputs {
                        label_counts: clients[c].label_counts.clone(),
                        dataset_size: clients[c].num_samples(),
                        n_max,
                        num_classes: 3,
                    };
                    let nu = client_importance(&inp, lambda_h).unwrap();
                    let b = |nu| round_bits(cosine_bits(r.t, horizon, 32, 8, nu).unwrap(), 8, 32);
                    nu < 1.0 && b(nu) < b(1.0)
                })
            });
            let ok = dynamic <= cosine && (!lowered || dynamic < cosine);
            all_ok &= ok;
            lines.push(format!(
                "seed {seed} lambda_h {lambda_h}: dynamic {dynamic} vs cosine {cosine}, uplink reduction vs fp32 {:.2}% (cosine {:.2}%)",
                100.0 * (1.0 - dynamic as f64 / fp32 as f64),
                100.0 * (1.0 - cosine as f64 / fp32 as f64),
            ));
        }
    }
    for l in &lines {
        let _ = writeln!(std::io::stderr().lock(), "    {l}");
    }
    report(
        2,
        "dynamic uplink <= cosine uplink",
        all_ok,
        &format!("{} seed/lambda_h combinations", lines.len()),
    );
}

#[test]
fn criterion_3_quantization_unbiasedness() {
    let start = Instant::now();
    const TRIALS: usize = 100_000;
    let failures: Vec<String> = (0..1000u64)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(1_000 + i);
            let len = rng.random_range(2..16);
            let magnitude = 10f64.powf(rng.random_range(-2.0..2.0));
            let values: Vec<f64> = (0..len).map(|_| rng.random_range(-magnitude..magnitude)).collect();
            let j = rng.random_range(0..len);
            let x = values[j];
            let alpha = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut out = Vec::new();
            for bits in [2u32, 4, 8] {
                let s = scale_factor(alpha, bits).unwrap();
                // The original tensor followed by TRIALS copies of element j:
                // alpha (and so s) is unchanged and each copy is an independent
                // rounding trial of that element.
                let mut trial = values.clone();
                trial.extend(std::iter::repeat_n(x, TRIALS));
                let t = DenseTensor::vector(trial).unwrap();
                let q = quantize(&t, bits, &mut rng).unwrap();
                let back = dequantize(&q).unwrap();
                let step = 1.0 / q.scale;
                let worst = t
                    .values()
                    .iter()
                    .zip(back.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let mean = back.values()[len..].iter().sum::<f64>() / TRIALS as f64;
                let tol = 4.0 * (1.0 / (2.0 * s)) * 10f64.powf(-2.5) * 2.0;
                if (mean - x).abs() > tol {
                    out.push(format!("tensor {i} b={bits}: mean {mean} vs {x} (tol {tol})"));
                }
                if worst > step * (1.0 + 1e-12) {
                    out.push(format!("tensor {i} b={bits}: roundtrip error {worst} > 1/s = {step}"));
                }
            }
            out
        })
        .collect();
    let elapsed = start.elapsed();
    report(
        3,
        "quantize/dequantize unbiased, error <= 1/s",
        failures.is_empty() && elapsed < Duration::from_secs(120),
        &format!(
            "1000 tensors x b in {{2,4,8}} x 1e5 trials, {} violations, {:.1}s{}",
            failures.len(),
            elapsed.as_secs_f64(),
            failures.first().map_or(String::new(), |f| format!(", first: {f}"))
        ),
    );
}

/// Exhaustive search for E0 by repeated powers.
fn e0_brute(lambda: f64, eta: f64, n: u64) -> u64 {
    let base = 1.0 + lambda * eta;
    let target = 1.0 + n as f64;
    (0u64..).find(|&k| base.powi(k as i32) >= target).unwrap()
}

/// Case analysis written out directly from the three-branch formula.
fn sensitivity_oracle(lambda: f64, eta: f64, e: u64, n: u64, xi: f64) -> f64 {
    let (ef, nf) = (e as f64, n as f64);
    if lambda == 0.0 {
        return 2.0 * xi * ef * eta / nf;
    }
    let e0 = e0_brute(lambda, eta, n);
    if e < e0 {
        2.0 * xi / (lambda * nf) * ((1.0 + lambda * eta).powi(e as i32) - 1.0)
    } else {
        2.0 * xi + 2.0 * eta * xi * (e - e0) as f64
    }
}

#[test]
fn criterion_4_sensitivity_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut branches = [0usize; 3];
    let mut e0_mismatch = 0;
    for i in 0..1000 {
        let lambda = match i % 4 {
            0 => 0.0,
            _ => 10f64.powf(rng.random_range(-2.0..1.5)),
        };
        let eta = 10f64.powf(rng.random_range(-2.0..0.0));
        let e = rng.random_range(1..=20u64);
        let n = rng.random_range(1..=5000u64);
        let xi = 10f64.powf(rng.random_range(-1.0..2.0));
        let got = sensitivity(&SensitivityInputs {
            lambda,
            eta,
            local_epochs: e,
            n_i: n,
            xi,
        })
        .unwrap();
        let want = sensitivity_oracle(lambda, eta, e, n, xi);
        worst = worst.max((got - want).abs() / want.abs());
        if lambda == 0.0 {
            branches[0] += 1;
        } else {
            let e0 = e0_brute(lambda, eta, n);
            branches[if e < e0 { 1 } else { 2 }] += 1;
            if compute_e0(lambda, eta, n).unwrap() != e0 {
                e0_mismatch += 1;
            }
            let base = 1.0 + lambda * eta;
            let target = 1.0 + n as f64;
            let k = compute_e0(lambda, eta, n).unwrap();
            if !(base.powi(k as i32) >= target && (k == 0 || base.powi(k as i32 - 1) < target)) {
                e0_mismatch += 1;
            }
        }
    }

    let at_zero = sensitivity(&SensitivityInputs {
        lambda: 0.0,
        eta: 0.1,
        local_epochs: 5,
        n_i: 100,
        xi: 100.0,
    })
    .unwrap();
    let near = sensitivity(&SensitivityInputs {
        lambda: 1e-9,
        eta: 0.1,
        local_epochs: 5,
        n_i: 100,
        xi: 100.0,
    })
    .unwrap();
    let continuity = ((near - at_zero) / at_zero).abs();

    report(
        4,
        "three-branch sensitivity, continuity, E0",
        worst <= 1e-9 && continuity <= 1e-6 && e0_mismatch == 0 && branches.iter().all(|&b| b > 0),
        &format!(
            "max rel err {worst:.2e} over branches {branches:?}, continuity {continuity:.2e}, E0 mismatches {e0_mismatch}"
        ),
    );
}

#[test]
fn criterion_5_laplace_statistics() {
    let n = 1_000_000;
    let mut details = Vec::new();
    let mut ok = true;
    for (i, scale) in [1e-3, 1.0, 37.5].into_iter().enumerate() {
        let like = ParamSet::new(vec![("w".into(), DenseTensor::zeros(vec![n]))]).unwrap();
        let noise = laplace_noise(scale, &like, &mut ChaCha8Rng::seed_from_u64(50 + i as u64)).unwrap();
        let mean = noise.iter_values().sum::<f64>() / n as f64;
        let mad = noise.iter_values().map(f64::abs).sum::<f64>() / n as f64;
        let mean_ok = mean.abs() < 4.0 * scale * 2f64.sqrt() / 1e3;
        let mad_ok = (mad - scale).abs() <= 0.02 * scale;
        ok &= mean_ok && mad_ok;
        details.push(format!("scale {scale}: mean {mean:.3e}, MAD/scale {:.4}", mad / scale));
    }
    report(5, "Laplace mean and MAD", ok, &details.join("; "));
}

fn convergence_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelSpec::logistic(2, 3),
        schedule: BitSchedule {
            mode: ScheduleMode::Static { bits: 32 },
            b_max: 32,
            b_min: 8,
            lambda_h: 0.75,
        },
        dp: None,
        rounds: 200,
        num_clients: 20,
        clients_per_round: 5,
        local_epochs: 5,
        batch_size: 64,
        learning_rate: 0.1,
        seed,
        partition: PartitionScheme::Dirichlet { alpha: 0.5 },
        data: DataSource::Synthetic {
            n_per_class: 200,
            test_per_class: 200,
            spread: 0.15,
        },
        eval_every: 10,
        parallel: true,
    }
}

fn final_test_acc(cfg: &ExperimentConfig) -> f64 {
    run(cfg).last().and_then(|r| r.test_acc).unwrap()
}

type Tweak = fn(&mut ExperimentConfig);

#[test]
fn criterion_6_end_to_end_convergence() {
    let start = Instant::now();
    let seeds = [0u64, 1, 2, 3, 4];
    let variants: [(&str, Tweak); 5] = [
        ("fp32", |_| {}),
        ("int8", |c| c.schedule.mode = ScheduleMode::Static { bits: 8 }),
        ("dynamic", |c| c.schedule.mode = ScheduleMode::Dynamic),
        ("dp_eps1e4", |c| {
            c.dp = Some(DpConfig {
                epsilon: 1e4,
                xi: 100.0,
            })
        }),
        ("dp_eps1e2", |c| {
            c.dp = Some(DpConfig {
                epsilon: 1e2,
                xi: 100.0,
            })
        }),
    ];
    let means: Vec<f64> = variants
        .par_iter()
        .map(|(_, tweak)| {
            seeds
                .iter()
                .map(|&s| {
                    let mut cfg = convergence_config(s);
                    tweak(&mut cfg);
                    final_test_acc(&cfg)
                })
                .sum::<f64>()
                / seeds.len() as f64
        })
        .collect();
    let [fp32, int8, dynamic, dp4, dp2] = means[..] else {
        unreachable!()
    };
    let elapsed = start.elapsed();
    let checks = [
        fp32 >= 0.90,
        (int8 - fp32).abs() <= 0.03,
        (dynamic - fp32).abs() <= 0.03,
        fp32 - dp4 <= 0.05,
        (fp32 - dp2) > (fp32 - dp4),
        elapsed < Duration::from_secs(300),
    ];
    report(
        6,
        "end-to-end accuracy over 5 seeds",
        checks.iter().all(|&c| c),
        &format!(
            "fp32 {fp32:.4}, int8 {int8:.4}, dynamic {dynamic:.4}, dp eps=1e4 {dp4:.4}, dp eps=1e2 {dp2:.4}, {:.1}s, checks {checks:?}",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_7_reference_equivalence() {
    let mut cfg = convergence_config(11);
    cfg.num_clients = 1;
    cfg.clients_per_round = 1;
    cfg.rounds = 50;
    cfg.batch_size = 32;
    let mut sim = Simulation::new(cfg.clone()).unwrap();
    let order = sim.clients()[0].indices.clone();
    let train = sim.train_data().clone();

    // Plain centralized SGD over the same sample order.
    let mut reference = sim.global_params().clone();
    let mut worst_ratio = 0.0f64;
    let mut ok = true;
    let mut bound_at_end = 0.0;
    let mut err_at_end = 0.0;
    for t in 1..=cfg.rounds {
        for _ in 0..cfg.local_epochs {
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<Sample<'_>> = chunk.iter().map(|&i| train.sample(i)).collect();
                let (_, g) = loss_and_grad(&cfg.model, &reference, &batch).unwrap();
                reference = sgd_step(&reference, &g, cfg.learning_rate).unwrap();
            }
        }
        sim.run_round().unwrap();
        let alpha = reference.max_abs().max(sim.global_params().max_abs());
        let bound = t as f64 * alpha / (2f64.powi(31) - 1.0) * 10.0;
        let err = sim.global_params().max_abs_diff(&reference).unwrap();
        worst_ratio = worst_ratio.max(err / bound);
        ok &= err <= bound;
        bound_at_end = bound;
        err_at_end = err;
    }
    report(
        7,
        "b=32 single-client run tracks centralized SGD",
        ok,
        &format!("final L-inf error {err_at_end:.3e} vs bound {bound_at_end:.3e}, worst err/bound {worst_ratio:.3}"),
    );
}

#[test]
fn criterion_8_determinism() {
    let mut cfg = convergence_config(8);
    cfg.rounds = 30;
    cfg.schedule.mode = ScheduleMode::Dynamic;
    cfg.dp = Some(DpConfig { epsilon: 1e3, xi: 10.0 });

    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    let mut finals = Vec::new();
    for (i, parallel) in [true, true, false].into_iter().enumerate() {
        cfg.parallel = parallel;
        let mut sim = Simulation::new(cfg.clone()).unwrap();
        let records = sim.run().unwrap();
        for format in [MetricsFormat::Csv, MetricsFormat::Jsonl] {
            let path = dir.path().join(format!("run{i}.{}", format.extension()));
            fedq::harness::export_metrics(&records, format, &path).unwrap();
            bytes.push((format, std::fs::read(&path).unwrap()));
        }
        finals.push(sim.global_params().clone());
    }
    let csv: Vec<&Vec<u8>> = bytes
        .iter()
        .filter(|(f, _)| *f == MetricsFormat::Csv)
        .map(|(_, b)| b)
        .collect();
    let jsonl: Vec<&Vec<u8>> = bytes
        .iter()
        .filter(|(f, _)| *f == MetricsFormat::Jsonl)
        .map(|(_, b)| b)
        .collect();
    let repeat_ok = csv[0] == csv[1] && jsonl[0] == jsonl[1] && finals[0] == finals[1];
    let serial_ok = csv[0] == csv[2] && jsonl[0] == jsonl[2] && finals[0] == finals[2];
    report(
        8,
        "byte-identical reruns, serial == parallel",
        repeat_ok && serial_ok,
        &format!(
            "repeat identical {repeat_ok}, serial vs parallel identical {serial_ok}, {} bytes of CSV",
            csv[0].len()
        ),
    );
}

#[test]
fn criterion_9_schedule_endpoints() {
    let mut ok = true;
    let mut detail = Vec::new();
    for (b_max, b_min, rounds) in [(32u32, 2u32, 100u64), (32, 8, 1000), (16, 4, 7), (8, 2, 2)] {
        let cfg = fedq::schedule::ScheduleConfig {
            mode: ScheduleMode::Cosine,
            b_max,
            b_min,
            total_rounds: rounds,
            lambda_h: 1.0,
        };
        let first = cfg.server_bits(0).unwrap();
        let last = cfg.server_bits(rounds - 1).unwrap();
        ok &= first == b_max && last == b_min;
        detail.push(format!("{b_max}->{b_min} over {rounds}: b(0)={first} b(T-1)={last}"));
    }

    // The exported metrics trace the same curve from 32 down to 2.
    let mut cfg = convergence_config(9);
    cfg.rounds = 40;
    cfg.schedule = BitSchedule {
        mode: ScheduleMode::Cosine,
        b_max: 32,
        b_min: 2,
        lambda_h: 1.0,
    };
    let records = run(&cfg);
    let csv = render_metrics(&records, MetricsFormat::Csv);
    let mean_bits: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    let monotone = mean_bits.windows(2).all(|w| w[1] <= w[0]);
    let midpoint = mean_bits[mean_bits.len() / 2];
    ok &= mean_bits[0] == 32.0 && *mean_bits.last().unwrap() == 2.0 && monotone && (midpoint - 17.0).abs() <= 1.5;
    detail.push(format!(
        "exported mean_bits first {} last {} midpoint {} monotone {monotone}",
        mean_bits[0],
        mean_bits.last().unwrap(),
        midpoint
    ));
    report(
        9,
        "schedule endpoints and exported cosine shape",
        ok,
        &detail.join("; "),
    );
}
