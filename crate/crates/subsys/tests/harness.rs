//! Monte Carlo harness: statistics, reproducibility, output files and fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subsys::harness::{self, ExperimentConfig, Family, FitMode, FitPoint, HarnessError, Metric, NoiseKind, ResultRow, Schedule, Sidecar};

fn without_timing(mut rows: Vec<ResultRow>) -> Vec<ResultRow> {
    rows.iter_mut().for_each(|r| r.wall_ms = 0);
    rows
}

#[test]
fn noiseless_points_never_fail() {
    for noise in [
        NoiseKind::Depolarising,
        NoiseKind::Independent,
        NoiseKind::CodeCapacity,
        NoiseKind::Phenomenological,
    ] {
        let cfg = ExperimentConfig {
            sizes: vec![3],
            noise,
            p: vec![0.0],
            trials: 100,
            ..ExperimentConfig::default()
        };
        let rows = harness::run_experiment_with_workers(&cfg, Some(1)).unwrap();
        assert_eq!((rows[0].fail_z, rows[0].fail_x, rows[0].trials), (0, 0, 100), "{noise}");
    }
}

#[test]
fn results_do_not_depend_on_the_worker_count() {
    let cfg = ExperimentConfig {
        sizes: vec![3, 4],
        p: vec![0.004, 0.008],
        trials: 300,
        seed: 17,
        ..ExperimentConfig::default()
    };
    let one = without_timing(harness::run_experiment_with_workers(&cfg, Some(1)).unwrap());
    for w in [2, 3, 8] {
        assert_eq!(one, without_timing(harness::run_experiment_with_workers(&cfg, Some(w)).unwrap()), "workers={w}");
    }
    assert!(one.iter().any(|r| r.fail_z + r.fail_x > 0));
    let other_seed = ExperimentConfig { seed: 18, ..cfg };
    assert_ne!(one, without_timing(harness::run_experiment_with_workers(&other_seed, Some(1)).unwrap()));
}

#[test]
fn csv_and_sidecar_round_trip() {
    let dir = std::env::temp_dir().join(format!("subsys-harness-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("out.csv");
    let cfg = ExperimentConfig {
        sizes: vec![3],
        noise: NoiseKind::Independent,
        eta: f64::INFINITY,
        p: vec![0.002, 0.004],
        trials: 64,
        output: Some(path.clone()),
        ..ExperimentConfig::default()
    };
    let rows = harness::run_experiment_with_workers(&cfg, Some(2)).unwrap();
    harness::write_outputs(&path, &rows, &cfg, Some(2)).unwrap();
    let back = harness::read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, rows);
    let header = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "family,L_or_code,l,schedule,parallelised,noise,p,eta,rounds,trials,fail_z,fail_x,rate_z,rate_x,ci_low,ci_high,seed,wall_ms"
    );
    let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(harness::sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(sidecar.csv_version, harness::CSV_VERSION);
    assert_eq!(sidecar.config, cfg);
    assert_eq!(sidecar.workers, Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn schedule_column_records_the_decoder_mode() {
    let mut cfg = ExperimentConfig {
        schedule: Schedule::Homogeneous { word: "Z3X3".into() },
        ..ExperimentConfig::default()
    };
    assert_eq!(cfg.schedule_label(), "Z3X3/gf");
    cfg.gauge_fixing = false;
    assert_eq!(cfg.schedule_label(), "Z3X3/merged");
    cfg.schedule = Schedule::AlternatingRows;
    assert_eq!(cfg.schedule_label(), "rows/merged");
    cfg.noise = NoiseKind::CodeCapacity;
    assert_eq!(cfg.schedule_label(), "perfect/merged");
}

#[test]
fn invalid_configurations_are_rejected() {
    let base = ExperimentConfig::default;
    let bad = [
        ExperimentConfig { p: vec![], ..base() },
        ExperimentConfig { p: vec![1.5], ..base() },
        ExperimentConfig { sizes: vec![1], ..base() },
        ExperimentConfig {
            sizes: vec![4, 6],
            rounds: Some(4),
            ..base()
        },
        ExperimentConfig { m: 0, ..base() },
        ExperimentConfig { eta: 0.0, ..base() },
        ExperimentConfig {
            schedule: Schedule::Homogeneous { word: "ZY".into() },
            ..base()
        },
        ExperimentConfig {
            family: Family::Hyperbolic,
            ..base()
        },
    ];
    for cfg in bad {
        let e = cfg.validate().unwrap_err();
        assert!(matches!(e, HarnessError::Config(_)), "{e}");
        assert_eq!(e.exit_code(), 1);
    }
    assert!(base().validate().is_ok());
}

#[test]
fn clopper_pearson_covers_the_true_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (p, n) in [(0.05, 200u64), (0.3, 50)] {
        let reps = 1000;
        let mut covered = 0;
        for _ in 0..reps {
            let k = (0..n).filter(|_| rng.gen::<f64>() < p).count() as u64;
            let (lo, hi) = harness::clopper_pearson(k, n, 0.95);
            assert!(lo <= k as f64 / n as f64 && k as f64 / n as f64 <= hi);
            covered += u32::from(lo <= p && p <= hi);
        }
        assert!(covered as f64 / reps as f64 >= 0.94, "p={p}: {covered}/{reps}");
    }
}

/// Failure rates following the quadratic scaling form around `p_th`.
fn synthetic(p_th: f64, nu: f64, trials: u64, rng: Option<&mut ChaCha8Rng>) -> Vec<FitPoint> {
    let mut points = Vec::new();
    for size in [4.0f64, 6.0, 8.0, 10.0] {
        for i in 0..9 {
            let p = 0.005 + 0.0005 * i as f64;
            let x = (p - p_th) * size.powf(1.0 / nu);
            points.push(FitPoint {
                size,
                p,
                rate: 0.2 + 8.0 * x + 300.0 * x * x,
                trials,
            });
        }
    }
    if let Some(rng) = rng {
        for q in &mut points {
            let k = (0..q.trials).filter(|_| rng.gen::<f64>() < q.rate).count();
            q.rate = k as f64 / q.trials as f64;
        }
    }
    points
}

#[test]
fn critical_exponent_fit_recovers_a_synthetic_threshold() {
    let exact = harness::fit_threshold(&synthetic(0.007, 1.2, 10_000, None), FitMode::CriticalExponent).unwrap();
    assert!((exact.p_th - 0.007).abs() < 1e-6, "{exact:?}");
    assert!((exact.nu.unwrap() - 1.2).abs() < 1e-3, "{exact:?}");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noisy = harness::fit_threshold(&synthetic(0.007, 1.2, 4000, Some(&mut rng)), FitMode::CriticalExponent).unwrap();
    assert!(noisy.std_err > 0.0 && noisy.std_err < 5e-4, "{noisy:?}");
    assert!((noisy.p_th - 0.007).abs() < 2.0 * noisy.std_err, "{noisy:?}");
}

#[test]
fn crossing_fit_finds_the_synthetic_threshold() {
    let fit = harness::fit_threshold(&synthetic(0.007, 1.0, 10_000, None), FitMode::Crossing).unwrap();
    assert_eq!(fit.support, 6);
    assert!((fit.p_th - 0.007).abs() < 2e-4, "{fit:?}");
}

#[test]
fn fits_reject_thin_data() {
    let points: Vec<FitPoint> = synthetic(0.007, 1.0, 1000, None).into_iter().filter(|q| q.size == 4.0).collect();
    assert!(matches!(
        harness::fit_threshold(&points, FitMode::Crossing),
        Err(HarnessError::InsufficientData)
    ));
}

#[test]
fn fit_points_select_the_metric() {
    let cfg = ExperimentConfig {
        sizes: vec![3],
        p: vec![0.01],
        trials: 200,
        ..ExperimentConfig::default()
    };
    let rows = harness::run_experiment_with_workers(&cfg, Some(1)).unwrap();
    let z = harness::fit_points(&rows, Metric::Z)[0];
    let x = harness::fit_points(&rows, Metric::X)[0];
    let sum = harness::fit_points(&rows, Metric::Sum)[0];
    assert_eq!((z.rate, x.rate), (rows[0].rate_z, rows[0].rate_x));
    assert!((sum.rate - z.rate - x.rate).abs() < 1e-12);
    assert_eq!(sum.size, 3.0);
}

#[test]
fn biased_thresholds_combine_both_branches() {
    let (pz, px) = (0.00931, 0.003236);
    let eta: f64 = 9.0;
    let expected = (pz + pz * (1.0 - pz) / eta).min(px + px * (1.0 - px) * eta);
    assert!((harness::bias_threshold_combine(pz, px, eta) - expected).abs() < 1e-15);
    for eta in [0.5, 1.0, 3.0, 10.0, 100.0] {
        let t = harness::bias_threshold_combine(pz, px, eta);
        assert!(t <= pz + pz / eta && t <= px + px * eta);
    }
    assert_eq!(harness::bias_threshold_combine(pz, px, f64::INFINITY), pz);
}

#[test]
fn rate_adjustments() {
    assert!((harness::k_adjusted_rate(0.01, 2, 66) - (1.0 - 0.99f64.powi(33))).abs() < 1e-15);
    assert!((harness::k_adjusted_rate(0.01, 66, 66) - 0.01).abs() < 1e-15);
    assert!((harness::rate_matched_size(2, 338) - 3.988).abs() < 1e-3);
}
