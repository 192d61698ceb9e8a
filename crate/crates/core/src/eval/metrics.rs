use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffnum::sigmoid;
use crate::Error;

/// Link score `σ(aᵀb)`.
pub fn score_link(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "score_link: dimension mismatch");
    sigmoid(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<(), Error> {
    if scores.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Eval("NaN score".into()));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann-Whitney statistic, computed from
/// average ranks so ties count one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, Error> {
    check_lengths(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Eval("roc_auc needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Ranking used by [`pr_auc`]: descending score, ties in the order of a
/// seeded shuffle of the input.
pub fn pr_ranking(scores: &[f64], seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    order
}

/// Average precision: mean of precision@k over the ranks k of the positives.
pub fn pr_auc(scores: &[f64], labels: &[bool], seed: u64) -> Result<f64, Error> {
    check_lengths(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::Eval("pr_auc needs at least one positive".into()));
    }
    let mut hits = 0usize;
    let mut total = 0.0;
    for (k, &idx) in pr_ranking(scores, seed).iter().enumerate() {
        if labels[idx] {
            hits += 1;
            total += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(total / positives as f64)
}

/// F1 of the positive class, predicting positive when `score >= threshold`.
/// Zero when nothing is predicted positive.
pub fn f1_binary(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64, Error> {
    check_lengths(scores, labels)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(f1_from_counts(tp, fp, fn_))
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// Support-weighted mean of per-class F1 over the classes present in `truth`.
pub fn weighted_f1(predicted: &[u32], truth: &[u32]) -> Result<f64, Error> {
    if predicted.len() != truth.len() {
        return Err(Error::Eval(format!(
            "{} predictions but {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Eval("weighted_f1 of an empty set".into()));
    }
    let mut classes: Vec<u32> = truth.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut total = 0.0;
    for c in classes {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == c, t == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        total += (tp + fn_) as f64 * f1_from_counts(tp, fp, fn_);
    }
    Ok(total / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_scores() {
        assert_eq!(score_link(&[1.0, 0.0], &[0.0, 3.0]), 0.5);
        let v = [1.0, 3.0];
        assert!((score_link(&v, &v) - 0.99995).abs() < 1e-5);
    }

    #[test]
    fn roc_edge_cases() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn pr_edge_cases() {
        assert_eq!(pr_auc(&[0.9, 0.8, 0.1], &[true, true, false], 0).unwrap(), 1.0);
        assert_eq!(pr_auc(&[0.2, 0.7, 0.1], &[true; 3], 0).unwrap(), 1.0);
        assert!(pr_auc(&[0.2], &[false], 0).is_err());
        // one positive ranked second
        assert_eq!(pr_auc(&[0.9, 0.8], &[false, true], 0).unwrap(), 0.5);
    }

    #[test]
    fn f1_edge_cases() {
        assert_eq!(f1_binary(&[0.9, 0.1], &[true, false], 0.5).unwrap(), 1.0);
        assert_eq!(f1_binary(&[0.2, 0.1], &[true, false], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn weighted_f1_perfect_and_mixed() {
        assert_eq!(weighted_f1(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        // class 0: tp 1 fn 1 fp 0 → 2/3 with support 2; class 1: tp 1 fp 1 → 2/3 with support 1
        let w = weighted_f1(&[0, 1, 1], &[0, 0, 1]).unwrap();
        assert!((w - 2.0 / 3.0).abs() < 1e-15);
    }
}
