use devlab::data::{gaussian_clusters, Dataset};
use devlab::nn_threshold::{estimate_threshold_grid, NnClassifier};
use devlab::postselect::*;
use devlab::trainers::{BackpropTrainer, ConstantTrainer, NnThresholdTrainer};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All 2x2 tables with entries in {0.1, 0.9}, row-major.
fn all_2x2() -> Vec<Vec<Vec<f64>>> {
    (0..16u32)
        .map(|bits| {
            let v = |b: u32| if bits >> b & 1 == 1 { 0.9 } else { 0.1 };
            vec![vec![v(0), v(1)], vec![v(2), v(3)]]
        })
        .collect()
}

/// First (row, col) holding the minimum, scanning rows then columns.
fn oracle_argmin(m: &[Vec<f64>]) -> (usize, usize, f64) {
    let mut flat = Vec::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            flat.push((i, j, v));
        }
    }
    let min = flat.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    *flat.iter().find(|c| c.2 == min).unwrap()
}

fn oracle_mean_argmin(means: &[f64]) -> (usize, f64) {
    let min = means.iter().cloned().fold(f64::INFINITY, f64::min);
    let i = means.iter().position(|&m| m == min).unwrap();
    (i, min)
}

fn row_means(m: &[Vec<f64>]) -> Vec<f64> {
    m.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect()
}

fn col_means(m: &[Vec<f64>]) -> Vec<f64> {
    (0..m[0].len())
        .map(|j| m.iter().map(|r| r[j]).sum::<f64>() / m.len() as f64)
        .collect()
}

#[test]
fn selectors_match_brute_force_on_every_2x2_table() {
    let tables = all_2x2();
    for val in &tables {
        for test in &tables {
            let t = ErrorTable::from_matrices(val, test).unwrap();
            let s = psuvs_select(&t);
            assert_eq!((s.arch, s.seed, s.error), oracle_argmin(val));
            let s = psuts_select(&t);
            assert_eq!((s.arch, s.seed, s.error), oracle_argmin(test));
            assert!(s.protocol_flawed);
            let a = avg_validated_architecture(&t);
            assert_eq!((a.index, a.mean_error), oracle_mean_argmin(&row_means(val)));
            let w = avg_validated_weights(&t);
            assert_eq!((w.index, w.mean_error), oracle_mean_argmin(&col_means(val)));
            let p = psuts_avg_architecture(&t);
            assert_eq!((p.index, p.mean_error), oracle_mean_argmin(&row_means(test)));
        }
    }
}

#[test]
fn averaged_selectors_match_brute_force_on_random_5x7() {
    let mut rng = ChaCha8Rng::seed_from_u64(57);
    for _ in 0..50 {
        let m: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..7).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let t = ErrorTable::from_matrices(&m, &m).unwrap();
        let a = avg_validated_architecture(&t);
        assert_eq!((a.index, a.mean_error), oracle_mean_argmin(&row_means(&m)));
        let w = avg_validated_weights(&t);
        assert_eq!((w.index, w.mean_error), oracle_mean_argmin(&col_means(&m)));
        let p = psuts_avg_architecture(&t);
        assert_eq!((p.index, p.mean_error), oracle_mean_argmin(&row_means(&m)));
    }
}

#[test]
fn selected_error_is_biased_low_exhaustively() {
    // every 2-valued 2x2 table is equally likely
    let tables = all_2x2();
    let mut sum_selected = 0.0;
    let mut sum_mean = 0.0;
    for val in &tables {
        let t = ErrorTable::from_matrices(val, val).unwrap();
        sum_selected += psuvs_select(&t).error;
        sum_mean += row_means(val).iter().sum::<f64>() / 2.0;
    }
    let n = tables.len() as f64;
    // E[min of 4 fair coins over {0.1, 0.9}] = 0.1 + 0.8 / 16
    assert!((sum_selected / n - 0.15).abs() < 1e-12);
    assert!((sum_mean / n - 0.5).abs() < 1e-12);
    assert!(sum_selected < sum_mean);
}

#[test]
fn selected_error_is_biased_low_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut sel, mut mean) = (0.0, 0.0);
    let trials = 2000;
    for _ in 0..trials {
        let m: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..5).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let t = ErrorTable::from_matrices(&m, &m).unwrap();
        sel += psuvs_select(&t).error;
        mean += row_means(&m).iter().sum::<f64>() / 5.0;
    }
    let (sel, mean) = (sel / trials as f64, mean / trials as f64);
    // min of 25 uniforms has expectation 1/26
    assert!((sel - 1.0 / 26.0).abs() < 0.01, "{sel}");
    assert!(sel < mean);
}

#[test]
fn std_of_mean_shrinks_as_root_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sigma = (1.0f64 / 12.0).sqrt();
    for n in [4usize, 8, 16] {
        let means: Vec<f64> = (0..20_000)
            .map(|_| (0..n).map(|_| rng.gen::<f64>()).sum::<f64>() / n as f64)
            .collect();
        let s = summarize_distribution(&means).unwrap();
        let expected = sigma / (n as f64).sqrt();
        let rel = (s.std - expected).abs() / expected;
        assert!(rel < 0.10, "n = {n}: {} vs {expected}", s.std);
    }
}

#[test]
fn uniform_summary_matches_analytic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let draws: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
    let s = summarize_distribution(&draws).unwrap();
    for (got, want) in [(s.min, 0.0), (s.q25, 0.25), (s.median, 0.5), (s.q75, 0.75), (s.max, 1.0)] {
        assert!((got - want).abs() < 0.05);
    }
    assert!((s.std - (1.0f64 / 12.0).sqrt()).abs() < 0.02);
}

#[test]
fn constant_trainer_cross_validates_to_constant() {
    let d = gaussian_clusters(2, 2, 23, 1.0, 3.0, 0.0, 1).unwrap();
    let cv = k_fold_cross_validate(&d, 4, &ConstantTrainer { error: 0.3 }, &ArchParams::default(), 2)
        .unwrap();
    assert_eq!(cv.mean_error, 0.3);
    assert_eq!(cv.summary.std, 0.0);
}

#[test]
fn five_fold_nn_matches_manual_experiments() {
    let d = gaussian_clusters(2, 2, 40, 1.2, 2.0, 0.0, 9).unwrap();
    let arch = ArchParams::default().with("threshold", 1.5);
    let cv = k_fold_cross_validate(&d, 5, &NnThresholdTrainer, &arch, 4).unwrap();

    let mut manual = Vec::new();
    for i in 0..5 {
        let test_idx = &cv.folds[i];
        let train_idx: Vec<usize> = (0..d.len()).filter(|j| !test_idx.contains(j)).collect();
        let train = d.subset(&train_idx);
        let mut wrong = 0;
        for &j in test_idx {
            // nearest neighbor by hand
            let x = &d.features[j];
            let mut best = (f64::INFINITY, 0);
            for (k, f) in train.features.iter().enumerate() {
                let dist = ((f[0] - x[0]).powi(2) + (f[1] - x[1]).powi(2)).sqrt();
                if dist < best.0 {
                    best = (dist, k);
                }
            }
            if best.0 > 1.5 || train.labels[best.1] != d.labels[j] {
                wrong += 1;
            }
        }
        manual.push(wrong as f64 / test_idx.len() as f64);
    }
    assert_eq!(cv.fold_errors, manual);
    assert_eq!(cv.mean_error, manual.iter().sum::<f64>() / 5.0);
}

#[test]
fn backprop_grid_is_reproducible() {
    let d = gaussian_clusters(2, 2, 60, 1.0, 2.0, 0.1, 3).unwrap();
    let p = Partition::split(d.len(), (0.5, 0.25, 0.25), 8).unwrap();
    let archs = vec![
        ArchParams::default().with("hidden", 2.0).with("epochs", 20.0),
        ArchParams::default().with("hidden", 4.0).with("epochs", 20.0),
    ];
    let grid = HyperGrid::new(archs, derived_seeds(8, 3)).unwrap();
    let trainer = BackpropTrainer::default();
    let a = run_grid(&trainer, &grid, &d, &p, GridOptions::default()).unwrap();
    let b = run_grid(&trainer, &grid, &d, &p, GridOptions::default()).unwrap();
    assert_eq!((a.k(), a.n()), (2, 3));
    assert_eq!(a.to_csv(), b.to_csv());
    a.check_complete().unwrap();
}

#[test]
fn nn_threshold_grid_has_zero_fitting_error() {
    let d = gaussian_clusters(2, 2, 50, 1.0, 2.0, 0.0, 3).unwrap();
    let p = Partition::split(d.len(), (0.6, 0.2, 0.2), 1).unwrap();
    let grid_d =
        estimate_threshold_grid(&d.subset(&p.train), &d.subset(&p.validation)).unwrap();
    let archs = grid_d
        .iter()
        .map(|&t| ArchParams::default().with("threshold", t))
        .collect();
    let grid = HyperGrid::new(archs, vec![0]).unwrap();
    let t = run_grid(&NnThresholdTrainer, &grid, &d, &p, GridOptions::default()).unwrap();
    assert_eq!((t.k(), t.n()), (3, 1));
    assert!(t.column(ErrorKind::Fit).iter().all(|&f| f == 0.0));
}

#[test]
fn constant_trainer_audit_has_zero_gaps() {
    let d = gaussian_clusters(2, 2, 50, 1.0, 2.0, 0.0, 3).unwrap();
    let spec = AuditSpec {
        architectures: vec![ArchParams::default(); 2],
        n_seeds: 3,
        fractions: (0.4, 0.2, 0.2),
        repeats: 10,
        master_seed: 1,
    };
    let r = luckiest_generalization_audit(&ConstantTrainer { error: 0.25 }, &d, &spec).unwrap();
    assert_eq!(r.repeats.len(), 10);
    assert!(r.repeats.iter().all(|x| x.psuvs_gap() == 0.0 && x.psuts_gap() == 0.0));
    assert_eq!(r.psuvs_gap.p_value, 1.0);
}

#[test]
fn single_cell_audit_is_plain_generalization_gap() {
    let d = gaussian_clusters(2, 2, 80, 1.5, 1.5, 0.1, 3).unwrap();
    let spec = AuditSpec {
        architectures: vec![ArchParams::default().with("threshold", 1.0)],
        n_seeds: 1,
        fractions: (0.4, 0.2, 0.2),
        repeats: 10,
        master_seed: 2,
    };
    let r = luckiest_generalization_audit(&NnThresholdTrainer, &d, &spec).unwrap();
    for rep in &r.repeats {
        let t = &r.tables[rep.repeat];
        let c = t.cell(0, 0);
        assert_eq!((rep.psuvs.arch, rep.psuvs.seed), (0, 0));
        assert_eq!(rep.psuvs_gap(), c.audit.unwrap() - c.val);
    }
}

fn small_dataset(n: usize) -> Dataset {
    Dataset::new((0..n).map(|i| vec![i as f64]).collect(), vec![0; n], 1).unwrap()
}

proptest! {
    #[test]
    fn selectors_equivariant_under_shift(
        vals in prop::collection::vec(0.0f64..0.5, 12),
        tests in prop::collection::vec(0.0f64..0.5, 12),
        c in 0.0f64..0.5,
    ) {
        let shape = |v: &[f64]| v.chunks(4).map(<[f64]>::to_vec).collect::<Vec<_>>();
        let shift = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        let a = ErrorTable::from_matrices(&shape(&vals), &shape(&tests)).unwrap();
        let b = ErrorTable::from_matrices(&shape(&shift(&vals)), &shape(&shift(&tests))).unwrap();
        let (x, y) = (psuvs_select(&a), psuvs_select(&b));
        prop_assert_eq!((x.arch, x.seed), (y.arch, y.seed));
        let (x, y) = (psuts_select(&a), psuts_select(&b));
        prop_assert_eq!((x.arch, x.seed), (y.arch, y.seed));
        prop_assert_eq!(avg_validated_architecture(&a).index, avg_validated_architecture(&b).index);
        prop_assert_eq!(avg_validated_weights(&a).index, avg_validated_weights(&b).index);
        prop_assert_eq!(psuts_avg_architecture(&a).index, psuts_avg_architecture(&b).index);
    }

    #[test]
    fn partitions_are_sound(
        total in 10usize..500,
        ft in 0.1f64..0.5,
        fv in 0.1f64..0.25,
        fe in 0.1f64..0.25,
        seed in any::<u64>(),
    ) {
        let p = Partition::split(total, (ft, fv, fe), seed).unwrap();
        prop_assert!(p.check_sound().is_ok());
        prop_assert!(p.overlap_warnings().is_empty());
        prop_assert_eq!(p.train.len() + p.validation.len() + p.test.len() + p.audit.len(), total);
    }

    #[test]
    fn folds_are_disjoint_and_cover(len in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(len >= k);
        let folds = kfold_indices(len, k, seed).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..len).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let d = small_dataset(len);
        let cv = k_fold_cross_validate(&d, k, &ConstantTrainer { error: 0.7 }, &ArchParams::default(), seed).unwrap();
        prop_assert_eq!(cv.folds, folds);
    }

    #[test]
    fn nn_coverage_is_monotone_in_threshold(
        q in prop::collection::vec(-10.0f64..10.0, 2),
        d1 in 0.0f64..5.0,
        extra in 0.0f64..5.0,
    ) {
        let t = Dataset::new(vec![vec![0.0, 0.0], vec![3.0, 1.0]], vec![0, 1], 2).unwrap();
        let a = NnClassifier::new(t.clone(), d1).unwrap().predict(&q).unwrap();
        let b = NnClassifier::new(t, d1 + extra).unwrap().predict(&q).unwrap();
        if a != devlab::nn_threshold::Prediction::Unknown {
            prop_assert_eq!(a, b);
        }
    }
}
