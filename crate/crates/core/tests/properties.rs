use dane::diffnum::Tensor;
use dane::eval::{pr_auc, roc_auc};
use dane::graph::{canonical, NodeId, NoiseDistribution};
use proptest::prelude::*;

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(any::<bool>(), n).prop_filter("both classes", |l| l.iter().any(|&x| x) && l.iter().any(|&x| !x)),
        )
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |d| Tensor::from_vec(rows, cols, d).unwrap())
}

proptest! {
    #[test]
    fn auc_ignores_monotone_rescaling((scores, labels) in scored()) {
        let squashed: Vec<f64> = scores.iter().map(|s| (s / 3.0).tanh() * 7.0 + 1.0).collect();
        let a = roc_auc(&scores, &labels).unwrap();
        prop_assert!((a - roc_auc(&squashed, &labels).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn negated_scores_mirror_auc((scores, labels) in scored()) {
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let sum = roc_auc(&scores, &labels).unwrap() + roc_auc(&negated, &labels).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn average_precision_is_a_probability((scores, labels) in scored(), seed in any::<u64>()) {
        let ap = pr_auc(&scores, &labels, seed).unwrap();
        prop_assert!(ap > 0.0 && ap <= 1.0);
        // a perfect ranking scores exactly 1
        let perfect: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        prop_assert_eq!(pr_auc(&perfect, &labels, seed).unwrap(), 1.0);
    }

    #[test]
    fn canonical_is_symmetric(u in 0usize..100, v in 0usize..100) {
        prop_assert_eq!(canonical(NodeId(u), NodeId(v)), canonical(NodeId(v), NodeId(u)));
    }

    #[test]
    fn noise_probabilities_follow_three_quarter_power(degrees in prop::collection::vec(0usize..50, 1..30)) {
        match NoiseDistribution::from_degrees(&degrees) {
            None => prop_assert!(degrees.iter().all(|&d| d == 0)),
            Some(noise) => {
                let p = noise.probabilities();
                let total: f64 = degrees.iter().map(|&d| (d as f64).powf(0.75)).sum();
                for (pi, &d) in p.iter().zip(&degrees) {
                    prop_assert!((pi - (d as f64).powf(0.75) / total).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn transposed_products_agree(a in matrix(3, 4), b in matrix(5, 4), c in matrix(3, 5)) {
        let nt = a.matmul_nt(&b);
        let plain = a.matmul(&b.transpose());
        for (x, y) in nt.data().iter().zip(plain.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let tn = c.matmul_tn(&a);
        let plain = c.transpose().matmul(&a);
        for (x, y) in tn.data().iter().zip(plain.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert_eq!(a.transpose().transpose(), a);
    }
}
