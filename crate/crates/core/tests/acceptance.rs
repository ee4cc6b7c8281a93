//! Acceptance suite. Every criterion prints one `PASS` or `FAIL` line to the
//! real stdout (not the captured test output), then asserts.

mod common;

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{
    check_split, gradient_check, random_binary_matrix, random_couple, random_spec, rng,
    voc_hierarchy,
};
use mtp::dataset::{
    load_features, load_triplets, InteractionData, MtpDataset, ScoreType, SideInfo, TargetSide,
    Triplet,
};
use mtp::encoders::{encode_hierarchy, CoupleEncoder};
use mtp::metrics::{
    arrmse, hamming_loss, instance_prf, macro_prf, micro_auroc, rmse, target_means, Prediction,
    PredictionSet,
};
use mtp::network::{init_model, Architecture};
use mtp::selector::{
    enumerate_rules, select_setting, QuestionnaireAnswers, ScoreAnswer, SelectorError, SettingLabel,
};
use mtp::splitter::{make_split, SplitConfig, SplitError, ValidationSetting};
use mtp::train::{evaluate_split, train_model, Loss, TrainConfig};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "{status} [{id}] {name} ({:.2} s): {detail}\n",
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

/// Runs `body`, which returns a verdict and a detail string, and reports it
/// against a runtime budget.
fn criterion(id: u32, name: &str, budget: Duration, body: impl FnOnce() -> (bool, String)) {
    let start = Instant::now();
    let (ok, detail) = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let detail = if in_time {
        detail
    } else {
        format!("{detail}; exceeded the {} s budget", budget.as_secs())
    };
    report(id, name, ok && in_time, elapsed, &detail);
    assert!(ok && in_time, "criterion {id} failed: {detail}");
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

const TABLE: [(
    bool,
    bool,
    bool,
    TargetSide,
    bool,
    ScoreAnswer,
    SettingLabel,
); 10] = {
    use ScoreAnswer::*;
    use SettingLabel::*;
    use TargetSide::{No, Yes, YesHierarchy};
    [
        (
            true,
            false,
            true,
            No,
            true,
            Binary,
            MultiLabelClassification,
        ),
        (true, false, true, No, true, Real, MultivariateRegression),
        (true, false, true, No, false, Any, MultiTaskLearning),
        (
            true,
            false,
            true,
            YesHierarchy,
            true,
            Binary,
            HierarchicalMultiLabelClassification,
        ),
        (true, false, true, Yes, false, Any, DyadicPrediction),
        (true, true, true, Yes, false, Any, ZeroShotLearning),
        (false, false, false, No, false, Any, MatrixCompletion),
        (false, false, true, Yes, false, Any, HybridMatrixCompletion),
        (
            true,
            true,
            true,
            Yes,
            false,
            Ordinal,
            ColdStartCollaborativeFiltering,
        ),
        (
            true,
            false,
            true,
            No,
            true,
            Nominal,
            MultiDimensionalClassification,
        ),
    ]
};

#[test]
fn criterion_1_rule_table() {
    criterion(1, "rule-table conformance", secs(1), || {
        let mut problems = Vec::new();
        for (q1, q2, q3, q4, q5, q6, label) in TABLE {
            let a = QuestionnaireAnswers::new(q1, q2, q3, q4, q5, q6);
            match select_setting(&a) {
                Ok(s) if s.label == label => {}
                other => problems.push(format!("{a} gave {other:?}, expected {label}")),
            }
        }

        let rules = enumerate_rules();
        let distinct: HashSet<QuestionnaireAnswers> = rules.iter().map(|(a, _)| *a).collect();
        if distinct.len() != rules.len() {
            problems.push("enumeration repeats a tuple".into());
        }
        let mut rejected = 0;
        let mut accepted = 0;
        for (a, outcome) in &rules {
            if select_setting(a) != *outcome {
                problems.push(format!("{a} is not deterministic"));
            }
            let infeasible = (a.novel_instances && !a.instance_side)
                || (a.novel_targets && a.target_side == TargetSide::No);
            match outcome {
                Err(SelectorError::UnsupportedCombination { .. }) => rejected += 1,
                Err(e) => problems.push(format!("{a}: unexpected error {e}")),
                Ok(s) => {
                    accepted += 1;
                    if infeasible {
                        problems.push(format!(
                            "{a} accepted as {} despite missing side information",
                            s.label
                        ));
                    }
                }
            }
        }
        let ok = problems.is_empty() && rules.len() == 192;
        let detail = if ok {
            format!("10/10 table rows; 192 tuples with one outcome each ({accepted} settings, {rejected} rejections)")
        } else {
            format!("{} tuples; {}", rules.len(), problems.join("; "))
        };
        (ok, detail)
    });
}

#[test]
fn criterion_2_gradients() {
    criterion(2, "gradient correctness", secs(30), || {
        let mut r = rng(20);
        let mut failures = Vec::new();
        let mut checked = 0;
        for k in 0..24u64 {
            let tri = k % 2 == 1;
            let model = init_model(random_spec(&mut r, tri), 1000 + k).unwrap();
            for _ in 0..3 {
                let couple = random_couple(&mut r, model.spec());
                if let Err(e) = gradient_check(&model, &couple, 1e-5, 1e-4, 1e-8) {
                    failures.push(format!("architecture {k}: {e}"));
                }
                checked += model.param_count();
            }
        }
        let detail = if failures.is_empty() {
            format!("24 architectures (12 two-branch, 12 tri-branch), {checked} components within rel 1e-4 / abs 1e-8")
        } else {
            failures.join("; ")
        };
        (failures.is_empty(), detail)
    });
}

#[test]
fn criterion_3_split_invariants() {
    criterion(3, "split invariants", secs(30), || {
        let settings = [
            ValidationSetting::A,
            ValidationSetting::B,
            ValidationSetting::C,
            ValidationSetting::D,
        ];
        let mut r = rng(3);
        let mut matrices = 0;
        let mut skipped = 0;
        let mut failures = Vec::new();
        let mut trial = 0u64;
        while matrices < 100 && trial < 1000 {
            trial += 1;
            let n = r.random_range(6..40);
            let m = r.random_range(6..40);
            let density = r.random_range(0.15..1.0);
            let data = random_binary_matrix(&mut r, n, m, density);
            let mut complete = true;
            for setting in settings {
                let cfg = SplitConfig::new(setting, 0.25, 0.1, trial);
                match make_split(&data, &cfg) {
                    Ok(split) => {
                        if let Err(e) = check_split(&data, &split) {
                            failures.push(format!("matrix {trial} {setting}: {e}"));
                        }
                        if make_split(&data, &cfg).ok() != Some(split) {
                            failures.push(format!("matrix {trial} {setting}: not reproducible"));
                        }
                    }
                    Err(SplitError::EmptyPartition(_)) => complete = false,
                    Err(e) => failures.push(format!("matrix {trial} {setting}: {e}")),
                }
            }
            if complete {
                matrices += 1;
            } else {
                skipped += 1;
            }
        }
        let ok = failures.is_empty() && matrices >= 100;
        let detail = if ok {
            format!("{matrices} matrices x 4 settings hold and reproduce ({skipped} too small to split were replaced)")
        } else {
            format!("{matrices} matrices; {}", failures.join("; "))
        };
        (ok, detail)
    });
}

fn brute_force_auroc(p: &PredictionSet) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for a in p.entries().iter().filter(|e| e.y_true == 1.0) {
        for b in p.entries().iter().filter(|e| e.y_true == 0.0) {
            pairs += 1.0;
            if a.y_pred > b.y_pred {
                wins += 1.0;
            } else if a.y_pred == b.y_pred {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

#[test]
fn criterion_4_metric_oracles() {
    criterion(4, "metric oracles", secs(10), || {
        let mut problems = Vec::new();
        let mut r = rng(4);
        let mut sets = 0;
        while sets < 50 {
            let len = r.random_range(2..=200);
            let mut cells = HashSet::new();
            let mut entries = Vec::new();
            while entries.len() < len {
                let (i, j) = (r.random_range(0..20), r.random_range(0..20));
                if cells.insert((i, j)) {
                    let y = if r.random_bool(0.4) { 1.0 } else { 0.0 };
                    entries.push(Prediction::new(
                        i,
                        j,
                        y,
                        r.random_range(0..50) as f64 / 49.0,
                    ));
                }
            }
            let positives = entries.iter().filter(|e| e.y_true == 1.0).count();
            if positives == 0 || positives == entries.len() {
                continue;
            }
            let p = PredictionSet::new(entries).unwrap();
            let (got, want) = (micro_auroc(&p).unwrap(), brute_force_auroc(&p));
            if !close(got, want) {
                problems.push(format!("set {sets}: auroc {got} vs oracle {want}"));
            }
            sets += 1;
        }

        let h = hamming_loss(
            &PredictionSet::from_vectors(&[1.0, 0.0, 1.0, 1.0], &[0.9, 0.9, 0.9, 0.1]).unwrap(),
        )
        .unwrap();
        if !close(h, 0.5) {
            problems.push(format!("hamming fixture {h}"));
        }
        let a = arrmse(
            &PredictionSet::new(vec![
                Prediction::new(0, 0, 1.0, 2.0),
                Prediction::new(1, 0, 3.0, 2.0),
            ])
            .unwrap(),
            &HashMap::from([(0, 2.0)]),
        )
        .unwrap();
        if !close(a, 1.0) {
            problems.push(format!("arrmse fixture {a}"));
        }
        let one_row = PredictionSet::new(vec![
            Prediction::new(0, 0, 1.0, 0.9),
            Prediction::new(0, 1, 0.0, 0.8),
        ])
        .unwrap();
        let (pi, ri, fi) = instance_prf(&one_row).unwrap();
        let (pm, rm, fm) = macro_prf(&one_row.transpose()).unwrap();
        for (what, got, want) in [
            ("instance precision", pi, 0.5),
            ("instance recall", ri, 1.0),
            ("instance f1", fi, 2.0 / 3.0),
            ("macro precision", pm, 0.5),
            ("macro recall", rm, 1.0),
            ("macro f1", fm, 2.0 / 3.0),
        ] {
            if !close(got, want) {
                problems.push(format!("{what} fixture {got}"));
            }
        }

        // aRRMSE baselines: train-derived target means versus test-derived ones.
        let mut r = rng(44);
        let mut triplets = Vec::new();
        for i in 0..60 {
            for j in 0..8 {
                if r.random_bool(0.6) {
                    let noise: f64 = StandardNormal.sample(&mut r);
                    triplets.push(Triplet::new(i, j, j as f64 + 0.5 * noise));
                }
            }
        }
        let data = InteractionData::new(60, 8, triplets, ScoreType::Real).unwrap();
        let split =
            make_split(&data, &SplitConfig::new(ValidationSetting::B, 0.25, 0.0, 4)).unwrap();
        let t = data.triplets();
        let preds = PredictionSet::new(
            split
                .test
                .iter()
                .map(|&k| {
                    let noise: f64 = StandardNormal.sample(&mut r);
                    Prediction::new(
                        t[k].instance,
                        t[k].target,
                        t[k].score,
                        t[k].score + 0.3 * noise,
                    )
                })
                .collect(),
        )
        .unwrap();
        let with_train = arrmse(&preds, &target_means(&data, &split.train)).unwrap();
        let with_test = arrmse(&preds, &target_means(&data, &split.test)).unwrap();
        let note = format!(
            "aRRMSE sensitivity: train-mean baseline {with_train:.4}, test-mean baseline {with_test:.4} (difference {:+.4})",
            with_train - with_test
        );

        let ok = problems.is_empty();
        let detail = if ok {
            format!("50 random sets match the pairwise oracle to 1e-12; hamming/aRRMSE/PRF fixtures exact; {note}")
        } else {
            problems.join("; ")
        };
        (ok, detail)
    });
}

#[test]
fn criterion_5_yeast_multilabel() {
    criterion(5, "yeast multi-label reproduction", secs(300), || {
        let dir = common::data_dir().join("yeast");
        let (tri, feat) = (dir.join("triplets.csv"), dir.join("features.csv"));
        if !tri.exists() || !feat.exists() {
            return (
                false,
                format!(
                    "dataset not found under {}; convert the mulan yeast.arff with scripts/prepare_data.py",
                    dir.display()
                ),
            );
        }
        let data = load_triplets(&tri, Some(ScoreType::Binary)).unwrap();
        let features = load_features(&feat).unwrap();
        let shape = (data.n(), features.dim(), data.m());
        let ds = MtpDataset::new(
            data,
            SideInfo::Features(Arc::new(features)),
            SideInfo::None,
            None,
        )
        .unwrap();
        let split = make_split(
            &ds.interactions,
            &SplitConfig::new(ValidationSetting::B, 0.25, 0.1, 0),
        )
        .unwrap();
        let enc = CoupleEncoder::for_dataset(&ds, &split.train, true).unwrap();
        let arch = Architecture::new(
            enc.instance.output_dim(),
            enc.target.output_dim(),
            Loss::Bce.output_transform(),
        );
        let model = init_model(arch.spec(), 0).unwrap();
        let (model, report) =
            train_model(model, &ds, &split, &enc, &TrainConfig::new(Loss::Bce)).unwrap();
        let eval = evaluate_split(&model, &ds, &split.test, &enc, Loss::Bce).unwrap();
        let preds = predictions(&ds.interactions, &eval.indices, &eval.scores);
        let h = hamming_loss(&preds).unwrap();
        (
            h <= 0.26,
            format!(
                "{} instances, {} features, {} targets; test Hamming loss {h:.4} (bound 0.26, reference 0.2309) after {} epochs",
                shape.0, shape.1, shape.2, report.epochs_run
            ),
        )
    });
}

fn predictions(data: &InteractionData, indices: &[usize], scores: &[f64]) -> PredictionSet {
    let t = data.triplets();
    PredictionSet::new(
        indices
            .iter()
            .zip(scores)
            .map(|(&k, &s)| Prediction::new(t[k].instance, t[k].target, t[k].score, s))
            .collect(),
    )
    .unwrap()
}

#[test]
fn criterion_6_movielens_completion() {
    criterion(6, "movielens100k matrix completion", secs(1200), || {
        let path = common::data_dir().join("movielens100k").join("ratings.csv");
        if !path.exists() {
            return (
                false,
                format!(
                    "dataset not found at {}; run scripts/prepare_data.py movielens",
                    path.display()
                ),
            );
        }
        let ds =
            MtpDataset::without_side_info(load_triplets(&path, Some(ScoreType::Ordinal)).unwrap());
        let split = make_split(
            &ds.interactions,
            &SplitConfig::new(ValidationSetting::A, 0.25, 0.1, 0),
        )
        .unwrap();
        let enc = CoupleEncoder::for_dataset(&ds, &split.train, true).unwrap();
        let arch = Architecture::new(
            enc.instance.output_dim(),
            enc.target.output_dim(),
            Loss::Mse.output_transform(),
        );
        let model = init_model(arch.spec(), 0).unwrap();
        let (model, report) =
            train_model(model, &ds, &split, &enc, &TrainConfig::new(Loss::Mse)).unwrap();
        let eval = evaluate_split(&model, &ds, &split.test, &enc, Loss::Mse).unwrap();
        let e = rmse(&predictions(&ds.interactions, &eval.indices, &eval.scores));
        (
            e <= 0.97,
            format!(
                "{} ratings, {} test; test RMSE {e:.4} (bound 0.97, reference 0.9391) after {} epochs",
                ds.interactions.len(),
                split.test.len(),
                report.epochs_run
            ),
        )
    });
}

#[test]
fn criterion_7_planted_structure() {
    criterion(7, "planted rank-2 structure recovery", secs(120), || {
        let (n, m) = (100, 80);
        let mut r = rng(7);
        let mut normal = || -> f64 { StandardNormal.sample(&mut r) };
        let u: Vec<[f64; 2]> = (0..n).map(|_| [normal(), normal()]).collect();
        let v: Vec<[f64; 2]> = (0..m).map(|_| [normal(), normal()]).collect();
        let mut r = rng(70);
        let mut triplets = Vec::new();
        for (i, ui) in u.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                if r.random_bool(0.3) {
                    let noise: f64 = StandardNormal.sample(&mut r);
                    let y = ui[0] * vj[0] + ui[1] * vj[1] + 0.1 * noise;
                    triplets.push(Triplet::new(i, j, y));
                }
            }
        }
        let ds = MtpDataset::without_side_info(
            InteractionData::new(n, m, triplets, ScoreType::Real).unwrap(),
        );
        let split = make_split(
            &ds.interactions,
            &SplitConfig::new(ValidationSetting::A, 0.25, 0.1, 0),
        )
        .unwrap();
        let enc = CoupleEncoder::for_dataset(&ds, &split.train, true).unwrap();
        let arch = Architecture::new(
            enc.instance.output_dim(),
            enc.target.output_dim(),
            Loss::Mse.output_transform(),
        );
        let model = init_model(arch.spec(), 0).unwrap();
        let cfg = TrainConfig {
            learning_rate: 3e-3,
            batch_size: 32,
            max_epochs: 400,
            patience: 30,
            ..TrainConfig::new(Loss::Mse)
        };
        let (model, report) = train_model(model, &ds, &split, &enc, &cfg).unwrap();
        let eval = evaluate_split(&model, &ds, &split.test, &enc, Loss::Mse).unwrap();
        let test = predictions(&ds.interactions, &eval.indices, &eval.scores);
        let model_rmse = rmse(&test);

        let t = ds.interactions.triplets();
        let train_mean =
            split.train.iter().map(|&k| t[k].score).sum::<f64>() / split.train.len() as f64;
        let baseline = rmse(&predictions(
            &ds.interactions,
            &eval.indices,
            &vec![train_mean; eval.indices.len()],
        ));
        let gain = 1.0 - model_rmse / baseline;
        (
            gain >= 0.30,
            format!(
                "test RMSE {model_rmse:.4} vs train-mean RMSE {baseline:.4}: {:.1}% better (bound 30%) after {} epochs",
                100.0 * gain,
                report.epochs_run
            ),
        )
    });
}

#[test]
fn criterion_8_full_scale_results() {
    criterion(8, "full-scale results (informational)", secs(1), || {
        let h = voc_hierarchy();
        let lengths: HashSet<usize> = (0..20)
            .map(|t| encode_hierarchy(t, &h).unwrap().len())
            .collect();
        let ok = lengths == HashSet::from([29]);
        (
            ok,
            format!(
                "image, dyadic and crowdsourcing benchmarks are not reproducible at desk scale; \
                 VOC-shaped hierarchy fixture encodes every tag to {lengths:?} dimensions (expected 29)"
            ),
        )
    });
}
