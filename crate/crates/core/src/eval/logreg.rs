use crate::diffnum::{DiffError, Differentiable, ParamStore, Tensor};
use crate::Error;

pub const L2_LAMBDA: f64 = 0.01;
pub const EPOCHS: usize = 500;
pub const STEP_SIZE: f64 = 0.1;

/// Multinomial logistic regression over `d` features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    classes: Vec<u32>,
    /// `classes × d`
    weights: Tensor,
    bias: Vec<f64>,
}

/// Mean cross-entropy plus `λ/2 ‖W‖²` (the bias is not penalized), over
/// parameters `logreg.w` and `logreg.b` of a store.
pub struct LogRegObjective<'a> {
    pub features: &'a Tensor,
    /// Class index of each row.
    pub targets: &'a [usize],
    pub l2: f64,
}

impl LogRegObjective<'_> {
    pub fn init_store(num_classes: usize, dim: usize) -> ParamStore {
        let mut store = ParamStore::new();
        store.insert("logreg.w", Tensor::zeros(num_classes, dim)).expect("fresh store");
        store.insert("logreg.b", Tensor::zeros(1, num_classes)).expect("fresh store");
        store
    }

    fn parts(store: &ParamStore) -> Result<(&Tensor, &Tensor), DiffError> {
        let get = |name: &'static str| store.by_name(name).map(|p| p.value()).ok_or(DiffError::Empty(name));
        Ok((get("logreg.w")?, get("logreg.b")?))
    }

    /// Softmax probabilities, one row per sample.
    fn probabilities(&self, w: &Tensor, b: &Tensor) -> Tensor {
        let mut logits = self.features.matmul_nt(w);
        for r in 0..logits.rows() {
            let row = logits.row_mut(r);
            for (z, bias) in row.iter_mut().zip(b.data()) {
                *z += bias;
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for z in row.iter_mut() {
                *z = (*z - max).exp();
                total += *z;
            }
            for z in row.iter_mut() {
                *z /= total;
            }
        }
        logits
    }
}

impl Differentiable for LogRegObjective<'_> {
    fn value(&self, store: &ParamStore) -> Result<f64, DiffError> {
        let (w, b) = Self::parts(store)?;
        let probs = self.probabilities(w, b);
        let ce: f64 = self.targets.iter().enumerate().map(|(i, &c)| -probs.get(i, c).ln()).sum();
        let penalty: f64 = w.data().iter().map(|x| x * x).sum();
        Ok(ce / self.targets.len() as f64 + 0.5 * self.l2 * penalty)
    }

    fn accumulate_gradient(&self, store: &mut ParamStore) -> Result<(), DiffError> {
        let (w, b) = Self::parts(store)?;
        let mut delta = self.probabilities(w, b);
        let n = self.targets.len() as f64;
        for (i, &c) in self.targets.iter().enumerate() {
            delta.set(i, c, delta.get(i, c) - 1.0);
        }
        let mut grad_w = delta.matmul_tn(self.features);
        for (g, x) in grad_w.data_mut().iter_mut().zip(w.data()) {
            *g = *g / n + self.l2 * x;
        }
        let mut grad_b = Tensor::zeros(1, delta.cols());
        for r in 0..delta.rows() {
            for (g, d) in grad_b.data_mut().iter_mut().zip(delta.row(r)) {
                *g += d / n;
            }
        }
        let w_id = store.id("logreg.w").expect("checked above");
        let b_id = store.id("logreg.b").expect("checked above");
        store.get_mut(w_id).grad_mut().add_assign(&grad_w);
        store.get_mut(b_id).grad_mut().add_assign(&grad_b);
        Ok(())
    }
}

/// Full-batch gradient descent from zero weights.
pub fn train_logreg(
    features: &Tensor,
    labels: &[u32],
    l2_lambda: f64,
    epochs: usize,
    step_size: f64,
) -> Result<LogisticRegression, Error> {
    if features.rows() != labels.len() {
        return Err(Error::Eval(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Eval("logistic regression needs at least two classes".into()));
    }
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label is a class"))
        .collect();
    let objective = LogRegObjective {
        features,
        targets: &targets,
        l2: l2_lambda,
    };
    let mut store = LogRegObjective::init_store(classes.len(), features.cols());
    for _ in 0..epochs {
        store.zero_grads();
        objective.accumulate_gradient(&mut store)?;
        for (_, p) in store.iter_mut() {
            let (value, grad) = p.value_and_grad_mut();
            for (x, g) in value.data_mut().iter_mut().zip(grad.data()) {
                *x -= step_size * g;
            }
        }
    }
    let (w, b) = LogRegObjective::parts(&store)?;
    Ok(LogisticRegression {
        classes,
        weights: w.clone(),
        bias: b.data().to_vec(),
    })
}

impl LogisticRegression {
    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    /// Most probable class per row; ties go to the smaller label.
    pub fn predict(&self, features: &Tensor) -> Result<Vec<u32>, Error> {
        if features.cols() != self.weights.cols() {
            return Err(Error::Eval(format!(
                "classifier expects {} features, got {}",
                self.weights.cols(),
                features.cols()
            )));
        }
        let logits = features.matmul_nt(&self.weights);
        Ok((0..logits.rows())
            .map(|r| {
                let mut best = 0;
                for (c, (z, b)) in logits.row(r).iter().zip(&self.bias).enumerate() {
                    if z + b > logits.get(r, best) + self.bias[best] {
                        best = c;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Tensor, Vec<u32>) {
        let rows = vec![
            vec![2.0, 2.1],
            vec![1.8, 2.4],
            vec![2.5, 1.7],
            vec![-2.0, -1.9],
            vec![-2.3, -2.2],
            vec![-1.6, -2.5],
        ];
        (Tensor::from_rows(&rows).unwrap(), vec![7, 7, 7, 3, 3, 3])
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs();
        let model = train_logreg(&x, &y, L2_LAMBDA, EPOCHS, STEP_SIZE).unwrap();
        assert_eq!(model.predict(&x).unwrap(), y);
    }

    #[test]
    fn heavy_penalty_shrinks_weights() {
        let (x, y) = blobs();
        let model = train_logreg(&x, &y, 1e6, EPOCHS, 1e-6).unwrap();
        assert!(model.weights().frobenius_norm() < 1e-2);
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = blobs();
        assert!(train_logreg(&x, &[1; 6], L2_LAMBDA, 1, STEP_SIZE).is_err());
    }
}
