use sdrnn::metrics::{auprc, auroc};
use sdrnn::numerics::Rng;
use sdrnn::Error;

/// Pairwise Mann–Whitney count.
fn auroc_pairs(s: &[f64], y: &[bool]) -> Option<f64> {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] && !y[j] {
                pairs += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (pairs > 0.0).then(|| num / pairs)
}

/// Σ (R_k − R_{k−1}) P_k over distinct thresholds, each recomputed from scratch.
fn auprc_thresholds(s: &[f64], y: &[bool]) -> Option<f64> {
    let positives = y.iter().filter(|&&v| v).count() as f64;
    if positives == 0.0 {
        return None;
    }
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut last_recall) = (0.0, 0.0);
    for t in thresholds {
        let selected: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= t).collect();
        let tp = selected.iter().filter(|&&i| y[i]).count() as f64;
        let recall = tp / positives;
        let precision = tp / selected.len() as f64;
        ap += (recall - last_recall) * precision;
        last_recall = recall;
    }
    Some(ap)
}

fn instance(rng: &mut Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.int_range(1, 50) as usize;
    let levels = rng.int_range(1, 8);
    let tied = rng.bernoulli(0.6);
    let p = rng.uniform();
    let scores = (0..n)
        .map(|_| if tied { rng.int_range(0, levels) as f64 / levels as f64 } else { rng.uniform() })
        .collect();
    let labels = (0..n).map(|_| rng.bernoulli(p)).collect();
    (scores, labels)
}

#[test]
fn metrics_match_brute_force_oracles() {
    let mut rng = Rng::new(2024);
    let mut defined = 0;
    for _ in 0..200 {
        let (s, y) = instance(&mut rng);
        match (auroc(&s, &y), auroc_pairs(&s, &y)) {
            (Ok(a), Some(b)) => {
                assert!((a - b).abs() <= 1e-12, "auroc {a} vs {b}");
                defined += 1;
            }
            (Err(Error::UndefinedMetric(_)), None) => {}
            (a, b) => panic!("auroc disagreement: {a:?} vs {b:?}"),
        }
        match (auprc(&s, &y), auprc_thresholds(&s, &y)) {
            (Ok(a), Some(b)) => assert!((a - b).abs() <= 1e-12, "auprc {a} vs {b}"),
            (Err(Error::UndefinedMetric(_)), None) => {}
            (a, b) => panic!("auprc disagreement: {a:?} vs {b:?}"),
        }
    }
    assert!(defined > 150);
}

#[test]
fn permutation_invariance() {
    let mut rng = Rng::new(5);
    for _ in 0..50 {
        let (s, y) = instance(&mut rng);
        let mut order: Vec<usize> = (0..s.len()).collect();
        rng.shuffle(&mut order);
        let ps: Vec<f64> = order.iter().map(|&i| s[i]).collect();
        let py: Vec<bool> = order.iter().map(|&i| y[i]).collect();
        assert_eq!(auroc(&s, &y).ok(), auroc(&ps, &py).ok());
        assert_eq!(auprc(&s, &y).ok(), auprc(&ps, &py).ok());
    }
}

#[test]
fn constant_scores_give_prevalence_and_one_half() {
    let y: Vec<bool> = (0..40).map(|i| i % 5 == 0).collect();
    let s = vec![0.3; 40];
    assert_eq!(auprc(&s, &y).unwrap(), 0.2);
    assert_eq!(auroc(&s, &y).unwrap(), 0.5);
}

#[test]
fn perfect_and_reversed_rankings() {
    let s: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let y: Vec<bool> = (0..20).map(|i| i >= 15).collect();
    assert_eq!(auroc(&s, &y).unwrap(), 1.0);
    assert_eq!(auprc(&s, &y).unwrap(), 1.0);
    let r: Vec<f64> = s.iter().map(|v| -v).collect();
    assert_eq!(auroc(&r, &y).unwrap(), 0.0);
}
