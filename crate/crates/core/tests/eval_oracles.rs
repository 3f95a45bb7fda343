use gini_core::eval::{
    apply_alignment, classification_report, hungarian_align, silhouette_score,
    wilcoxon_signed_rank_with, WilcoxonMode,
};
use gini_core::{DataMatrix, MetricSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

mod oracles;
use oracles::{agreement, brute_silhouette, enumerated_p, permutations};

#[test]
fn hungarian_matches_permutation_enumeration() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
    let perms = permutations(4);
    assert_eq!(perms.len(), 24);
    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let got = hungarian_align(&pred, &truth, 4).unwrap();
        // first maximum in lexicographic order
        let mut best = &perms[0];
        for p in &perms {
            if agreement(&pred, &truth, p) > agreement(&pred, &truth, best) {
                best = p;
            }
        }
        assert_eq!(&got, best);
        assert!(agreement(&pred, &truth, &got) >= agreement(&pred, &truth, &[0, 1, 2, 3]));
    }
}

#[test]
fn alignment_undoes_relabeling() {
    let truth = vec![0, 0, 1, 1, 2, 2, 2];
    let renamed: Vec<usize> = truth.iter().map(|&t| [2, 0, 1][t]).collect();
    let perm = hungarian_align(&renamed, &truth, 3).unwrap();
    assert_eq!(apply_alignment(&renamed, &perm), truth);
}

#[test]
fn report_is_invariant_under_joint_relabeling() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
    for _ in 0..200 {
        let n = rng.gen_range(1..30);
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
        let mut map: Vec<usize> = (0..4).collect();
        map.shuffle(&mut rng);
        let a = classification_report(&pred, &truth).unwrap();
        let rp: Vec<usize> = pred.iter().map(|&p| map[p]).collect();
        let rt: Vec<usize> = truth.iter().map(|&t| map[t]).collect();
        let b = classification_report(&rp, &rt).unwrap();
        assert!((a.precision - b.precision).abs() < 1e-12);
        assert!((a.recall - b.recall).abs() < 1e-12);
        assert!((a.f1 - b.f1).abs() < 1e-12);
    }
}

#[test]
fn silhouette_matches_definition() {
    let pts = [
        [0.0, 0.0],
        [1.0, 0.5],
        [0.5, 2.0],
        [5.0, 5.0],
        [6.0, 4.5],
        [9.0, 1.0],
    ];
    let data = DataMatrix::from_rows(&pts).unwrap();
    for labels in [
        vec![0, 0, 0, 1, 1, 1],
        vec![0, 0, 1, 1, 1, 2],
        vec![1, 0, 1, 0, 1, 0],
    ] {
        let got = silhouette_score(&data, &labels, MetricSpec::Euclidean).unwrap();
        let want = brute_silhouette(&pts, &labels);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        let relabeled: Vec<usize> = labels.iter().map(|l| l + 5).collect();
        assert_eq!(
            silhouette_score(&data, &relabeled, MetricSpec::Euclidean).unwrap(),
            got
        );
    }
}

#[test]
fn exact_wilcoxon_matches_enumeration() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(10);
    for _ in 0..300 {
        let n = rng.gen_range(5..=12);
        let tied = rng.gen_bool(0.5);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|x| {
                let step = if tied {
                    rng.gen_range(1..=3) as f64 * 0.125
                } else {
                    rng.gen_range(0.01..0.5)
                };
                if rng.gen_bool(0.5) {
                    x + step
                } else {
                    x - step
                }
            })
            .collect();
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let r = wilcoxon_signed_rank_with(&a, &b, WilcoxonMode::Exact).unwrap();
        let (stat, p) = enumerated_p(&diffs);
        assert!((r.statistic - stat).abs() < 1e-12);
        assert!((r.p_value - p).abs() < 1e-12, "{} vs {p}", r.p_value);
    }
}

#[test]
fn normal_mode_is_close_to_exact_for_moderate_n() {
    let a: Vec<f64> = (0..20).map(|i| (i as f64 * 1.3).sin() * 4.0).collect();
    let b: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).cos() * 3.0).collect();
    let exact = wilcoxon_signed_rank_with(&a, &b, WilcoxonMode::Exact).unwrap();
    let approx = wilcoxon_signed_rank_with(&a, &b, WilcoxonMode::Normal).unwrap();
    assert_eq!(exact.statistic, approx.statistic);
    assert!((exact.p_value - approx.p_value).abs() < 0.02);
}
