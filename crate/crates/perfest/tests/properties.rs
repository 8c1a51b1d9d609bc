//! Property tests for the invariants that hold over whole
//! input families rather than single examples.

use proptest::prelude::*;

use perfest::frame::{read_csv_str, write_csv_str, Column, CsvOptions};
use perfest::metrics::{classification_metrics, regression_metrics, MetricRequest, TrainContext};
use perfest::prepost::{post_maxutil, CostBenefitMatrix};
use perfest::resampling::{
    cv_splits, holdout_splits, monte_carlo_splits, CvSettings, HoldoutSettings,
    MonteCarloSettings, SplitPlan, WindowSize,
};
use perfest::stats::signed_rank_test;
use perfest::workflow::Predictions;

fn label_column(codes: &[usize]) -> Column {
    let names = ["a", "b", "c"];
    Column::categorical("y", codes.iter().map(|&c| Some(names[c % 3])).collect())
}

fn label_predictions(codes: &[usize]) -> Predictions {
    let names = ["a", "b", "c"];
    Predictions::Labels(
        codes
            .iter()
            .map(|&c| Some(names[c % 3].to_string()))
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cv_plans_partition_and_are_deterministic(
        n in 10usize..200,
        n_folds in 2usize..10,
        n_reps in 1usize..3,
        seed in 0u64..10_000,
    ) {
        prop_assume!(n >= n_folds);
        let cfg = CvSettings { n_reps, n_folds, seed, strat: false, data_splits: None };
        let plan = cv_splits(n, None, &cfg).unwrap();
        let again = cv_splits(n, None, &cfg).unwrap();
        prop_assert_eq!(&plan, &again);
        prop_assert_eq!(plan.iterations.len(), n_reps * n_folds);
        for rep in 0..n_reps {
            let mut seen = vec![0u8; n];
            for it in &plan.iterations[rep * n_folds..(rep + 1) * n_folds] {
                for &t in &it.test {
                    seen[t] += 1;
                }
                // Disjoint train/test within an iteration.
                let mut in_test = vec![false; n];
                for &t in &it.test { in_test[t] = true; }
                prop_assert!(it.train.iter().all(|&i| !in_test[i]));
            }
            prop_assert!(seen.iter().all(|&c| c == 1), "folds must partition");
        }
        // Fold sizes differ by at most one.
        let sizes: Vec<usize> = plan.iterations.iter().map(|it| it.test.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn stratified_cv_balances_every_class(
        class_counts in prop::collection::vec(5usize..40, 2..4),
        n_folds in 2usize..6,
        seed in 0u64..1_000,
    ) {
        let labels: Vec<u32> = class_counts
            .iter()
            .enumerate()
            .flat_map(|(c, &count)| std::iter::repeat_n(c as u32, count))
            .collect();
        let n = labels.len();
        let cfg = CvSettings { n_reps: 1, n_folds, seed, strat: true, data_splits: None };
        let plan = cv_splits(n, Some(&labels), &cfg).unwrap();
        for class in 0..class_counts.len() as u32 {
            let counts: Vec<usize> = plan
                .iterations
                .iter()
                .map(|it| it.test.iter().filter(|&&i| labels[i] == class).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "class {class}: {counts:?}");
        }
    }

    #[test]
    fn holdout_plans_have_requested_sizes(
        n in 10usize..300,
        hld in 0.05f64..0.9,
        n_reps in 1usize..4,
        seed in 0u64..1_000,
    ) {
        prop_assume!((n as f64 * hld).floor() >= 1.0);
        let cfg = HoldoutSettings { n_reps, hld_sz: hld, seed, strat: false, data_splits: None };
        let plan = holdout_splits(n, None, &cfg).unwrap();
        let want = (n as f64 * hld).round() as usize;
        for it in &plan.iterations {
            prop_assert_eq!(it.test.len(), want);
            prop_assert_eq!(it.train.len(), n - want);
        }
    }

    #[test]
    fn monte_carlo_time_order_invariant(
        n in 20usize..400,
        train_frac in 0.1f64..0.6,
        test_frac in 0.05f64..0.3,
        seed in 0u64..1_000,
    ) {
        let w_train = (train_frac * n as f64).floor() as usize;
        let w_test = (test_frac * n as f64).floor() as usize;
        prop_assume!(w_train >= 1 && w_test >= 1 && w_train + w_test < n);
        let available = n - w_train - w_test + 1;
        let cfg = MonteCarloSettings {
            n_reps: available.min(5),
            sz_train: WindowSize::Fraction(train_frac),
            sz_test: WindowSize::Fraction(test_frac),
            seed,
            data_splits: None,
        };
        let plan = monte_carlo_splits(n, &cfg).unwrap();
        for it in &plan.iterations {
            prop_assert!(it.train.iter().max().unwrap() < it.test.iter().min().unwrap());
            // Contiguity.
            for pair in it.train.windows(2) {
                prop_assert_eq!(pair[1], pair[0] + 1);
            }
            for pair in it.test.windows(2) {
                prop_assert_eq!(pair[1], pair[0] + 1);
            }
        }
    }

    #[test]
    fn split_plan_json_round_trips(
        n in 10usize..60,
        n_folds in 2usize..6,
        seed in 0u64..1_000,
    ) {
        prop_assume!(n >= n_folds);
        let cfg = CvSettings { n_reps: 1, n_folds, seed, strat: false, data_splits: None };
        let plan = cv_splits(n, None, &cfg).unwrap();
        let back = SplitPlan::from_json(&plan.to_json()).unwrap();
        prop_assert_eq!(plan, back);
    }

    #[test]
    fn acc_plus_err_is_one(
        trues in prop::collection::vec(0usize..3, 1..40),
        preds_seed in prop::collection::vec(0usize..3, 1..40),
    ) {
        let n = trues.len().min(preds_seed.len());
        let t = label_column(&trues[..n]);
        let p = label_predictions(&preds_seed[..n]);
        let s = classification_metrics(&t, &p, &MetricRequest::new(&["acc", "err"])).unwrap();
        let acc = s.get("acc").unwrap();
        let err = s.get("err").unwrap();
        prop_assert!((acc + err - 1.0).abs() < 1e-12);
    }

    #[test]
    fn f_measure_symmetric_in_prec_and_rec(
        tp in 0usize..20,
        fp in 0usize..20,
        fn_ in 0usize..20,
    ) {
        // At beta = 1 the measure is symmetric: swapping precision and
        // recall (equivalently transposing FP and FN) leaves F unchanged.
        prop_assume!(tp + fp > 0 && tp + fn_ > 0);
        let build = |fp: usize, fn_: usize| {
            let mut trues = Vec::new();
            let mut preds = Vec::new();
            for _ in 0..tp { trues.push(0); preds.push(0); }
            for _ in 0..fp { trues.push(1); preds.push(0); }
            for _ in 0..fn_ { trues.push(0); preds.push(1); }
            let mut req = MetricRequest::new(&["F"]);
            req.pos_class = Some("a".to_string());
            classification_metrics(&label_column(&trues), &label_predictions(&preds), &req)
                .unwrap()
                .get("F")
        };
        let f_ab = build(fp, fn_);
        let f_ba = build(fn_, fp);
        match (f_ab, f_ba) {
            (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
            (None, None) => {}
            other => prop_assert!(false, "asymmetric definedness: {:?}", other),
        }
    }

    #[test]
    fn rmse_squared_is_mse_and_dominates_mae(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..50),
    ) {
        let trues: Vec<Option<f64>> = pairs.iter().map(|(t, _)| Some(*t)).collect();
        let preds: Vec<Option<f64>> = pairs.iter().map(|(_, p)| Some(*p)).collect();
        let t = Column::numeric("y", trues).unwrap();
        let p = Predictions::Numeric(preds);
        let s = regression_metrics(
            &t,
            &p,
            &MetricRequest::new(&["mae", "mse", "rmse"]),
            &TrainContext::default(),
        )
        .unwrap();
        let (mae, mse, rmse) = (
            s.get("mae").unwrap(),
            s.get("mse").unwrap(),
            s.get("rmse").unwrap(),
        );
        prop_assert!((rmse * rmse - mse).abs() <= 1e-9 * (1.0 + mse));
        prop_assert!(mae <= rmse + 1e-9);
    }

    #[test]
    fn maxutil_positive_scaling_invariance(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..20),
        scale in 0.01f64..50.0,
    ) {
        let classes = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let entries = vec![
            vec![2.0, -1.0, -0.5],
            vec![-0.25, 1.5, -2.0],
            vec![-1.0, -0.75, 3.0],
        ];
        let scaled: Vec<Vec<f64>> = entries
            .iter()
            .map(|r| r.iter().map(|v| v * scale).collect())
            .collect();
        let normalized: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            })
            .collect();
        let preds = Predictions::Probabilities {
            class_order: classes.clone(),
            rows: normalized,
        };
        let cb1 = CostBenefitMatrix::new(classes.clone(), entries).unwrap();
        let cb2 = CostBenefitMatrix::new(classes, scaled).unwrap();
        prop_assert_eq!(
            post_maxutil(&preds, &cb1).unwrap(),
            post_maxutil(&preds, &cb2).unwrap()
        );
    }

    #[test]
    fn wilcoxon_exact_matches_enumeration(
        raw in prop::collection::vec(-4i32..=4, 1..=10),
    ) {
        let diffs: Vec<f64> = raw.iter().map(|&v| v as f64 / 2.0).collect();
        let ours = signed_rank_test(&diffs);
        // Enumeration oracle over the observed nonzero ranks.
        let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
        if nonzero.is_empty() {
            prop_assert_eq!(ours.p_value, None);
            return Ok(());
        }
        let m = nonzero.len();
        let mut ranks = vec![0.0; m];
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| nonzero[a].abs().partial_cmp(&nonzero[b].abs()).unwrap());
        let mut i = 0;
        while i < m {
            let mut j = i;
            while j + 1 < m && nonzero[order[j + 1]].abs() == nonzero[order[i]].abs() {
                j += 1;
            }
            let mean_rank = (i + 1 + j + 1) as f64 / 2.0;
            for &idx in &order[i..=j] {
                ranks[idx] = mean_rank;
            }
            i = j + 1;
        }
        let observed: f64 = (0..m).filter(|&i| nonzero[i] > 0.0).map(|i| ranks[i]).sum();
        let (mut le, mut ge) = (0usize, 0usize);
        for mask in 0..(1usize << m) {
            let w: f64 = (0..m).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
            if w <= observed + 1e-12 { le += 1; }
            if w >= observed - 1e-12 { ge += 1; }
        }
        let total = (1usize << m) as f64;
        let oracle = (2.0 * (le as f64 / total).min(ge as f64 / total)).min(1.0);
        prop_assert!((ours.p_value.unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn csv_written_frames_reread_identically(
        rows in prop::collection::vec((any::<i32>(), 0usize..4, any::<bool>()), 1..30),
    ) {
        // Build CSV text with numeric, categorical and missing cells.
        let labels = ["red", "green", "blue", "NA"];
        let mut text = String::from("num,cat\n");
        for (x, label, missing) in &rows {
            let num = if *missing { "NA".to_string() } else { format!("{x}") };
            text.push_str(&format!("{num},{}\n", labels[*label]));
        }
        let opts = CsvOptions::default();
        let frame = read_csv_str(&text, &opts).unwrap();
        let written = write_csv_str(&frame, "NA");
        let back = read_csv_str(&written, &opts).unwrap();
        prop_assert_eq!(frame, back);
    }
}
