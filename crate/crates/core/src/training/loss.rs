use std::sync::Arc;

use crate::diffnum::{DiffError, Tape, Tensor, Var};
use crate::graph::{Edge, NodeId};
use crate::Error;

/// One positive pair `(u, v)` and its noise nodes `z_1..z_R`. `v` is the
/// center node the noise nodes are contrasted against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub context: NodeId,
    pub center: NodeId,
    pub noise: Vec<NodeId>,
}

/// Records the batch-mean negative-sampling loss
/// `−log σ(x̂_uᵀ x̂_v) − Σ_r log σ(−x̂_{z_r}ᵀ x̂_v)` over `pred` (`|V| × d`).
pub fn record_ns_loss(tape: &mut Tape, pred: Var, batch: &[Sample]) -> Result<Var, DiffError> {
    if batch.is_empty() {
        return Err(DiffError::Empty("negative-sampling batch"));
    }
    let negatives = batch[0].noise.len();
    if batch.iter().any(|s| s.noise.len() != negatives) {
        return Err(DiffError::ShapeMismatch {
            op: "ns_loss",
            lhs: (batch.len(), negatives),
            rhs: (batch.len(), 0),
        });
    }
    let gather = |tape: &mut Tape, nodes: Vec<usize>| tape.gather_rows(pred, Arc::from(nodes));
    let centers = gather(tape, batch.iter().map(|s| s.center.0).collect())?;
    let contexts = gather(tape, batch.iter().map(|s| s.context.0).collect())?;
    let positive = tape.row_dot(contexts, centers)?;
    let mut total = tape.log_sigmoid(positive)?;
    for r in 0..negatives {
        let noise = gather(tape, batch.iter().map(|s| s.noise[r].0).collect())?;
        let dots = tape.row_dot(noise, centers)?;
        let flipped = tape.scale(dots, -1.0)?;
        let term = tape.log_sigmoid(flipped)?;
        total = tape.add(total, term)?;
    }
    let sum = tape.sum(total)?;
    tape.scale(sum, -1.0 / batch.len() as f64)
}

/// Value of the negative-sampling loss for fixed predictions.
pub fn ns_loss(pred: &Tensor, batch: &[Sample]) -> Result<f64, DiffError> {
    let mut tape = Tape::new();
    let p = tape.input(pred.clone())?;
    let loss = record_ns_loss(&mut tape, p, batch)?;
    Ok(tape.value(loss).item())
}

/// Exact softmax objective: `−Σ log [exp(x̂_uᵀx̂_v) / Σ_{z ∈ N(v)} exp(x̂_zᵀx̂_v)]`
/// where `N(v)` are the nodes sharing an edge with `v` in `edges`.
///
/// Undirected edges contribute once per orientation; directed edges `(v, u)`
/// once, with `v` as the conditioning node and `N(v)` its out-neighbors.
pub fn softmax_loss_oracle(pred: &Tensor, edges: &[Edge], directed: bool) -> Result<f64, Error> {
    let n = pred.rows();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut terms = Vec::new();
    for &(a, b) in edges {
        if a.0 >= n || b.0 >= n {
            return Err(Error::Training(format!("edge ({a}, {b}) has no predicted embedding")));
        }
        neighbors[a.0].push(b.0);
        terms.push((a.0, b.0));
        if !directed {
            neighbors[b.0].push(a.0);
            terms.push((b.0, a.0));
        }
    }
    let score = |x: usize, y: usize| -> f64 { pred.row(x).iter().zip(pred.row(y)).map(|(p, q)| p * q).sum() };
    let mut loss = 0.0;
    for (center, context) in terms {
        let scope = &neighbors[center];
        if scope.is_empty() {
            return Err(Error::Training(format!("node {center} has no incident edge")));
        }
        let logits: Vec<f64> = scope.iter().map(|&z| score(z, center)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_denominator = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        loss -= score(context, center) - log_denominator;
    }
    Ok(loss)
}
