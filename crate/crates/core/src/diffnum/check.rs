use super::{DiffError, ParamStore, Tape, Tensor, Var};

/// A scalar function of the parameters in a store, with an analytic gradient.
pub trait Differentiable {
    fn value(&self, params: &ParamStore) -> Result<f64, DiffError>;

    /// Adds the gradient of [`Differentiable::value`] into the store's accumulators.
    fn accumulate_gradient(&self, params: &mut ParamStore) -> Result<(), DiffError>;
}

/// Adapts a closure that records a scalar expression on a fresh tape.
pub struct TapeObjective<F>(pub F);

impl<F> Differentiable for TapeObjective<F>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var, DiffError>,
{
    fn value(&self, params: &ParamStore) -> Result<f64, DiffError> {
        let mut tape = Tape::new();
        let out = (self.0)(&mut tape, params)?;
        scalar_of(&tape, out)
    }

    fn accumulate_gradient(&self, params: &mut ParamStore) -> Result<(), DiffError> {
        let mut tape = Tape::new();
        let out = (self.0)(&mut tape, params)?;
        scalar_of(&tape, out)?;
        tape.backward(out, &Tensor::scalar(1.0), params)
    }
}

fn scalar_of(tape: &Tape, v: Var) -> Result<f64, DiffError> {
    match tape.shape(v) {
        (1, 1) => Ok(tape.value(v).item()),
        shape => Err(DiffError::ShapeMismatch {
            op: "grad_check",
            lhs: shape,
            rhs: (1, 1),
        }),
    }
}

/// Compares the analytic gradient against central differences over every
/// parameter entry and returns `max |analytic − numeric| / max(1, |analytic|)`.
///
/// The store's values are restored on return; its gradient accumulators are
/// left holding the analytic gradient.
pub fn grad_check(
    objective: &impl Differentiable,
    params: &mut ParamStore,
    epsilon: f64,
) -> Result<f64, DiffError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(DiffError::InvalidEpsilon(epsilon));
    }
    params.zero_grads();
    objective.accumulate_gradient(params)?;

    let ids: Vec<_> = params.iter().map(|(id, _)| id).collect();
    let mut worst = 0.0f64;
    for id in ids {
        for k in 0..params.get(id).value().len() {
            let original = params.get(id).value().data()[k];
            params.get_mut(id).value_mut().data_mut()[k] = original + epsilon;
            let plus = objective.value(params);
            params.get_mut(id).value_mut().data_mut()[k] = original - epsilon;
            let minus = objective.value(params);
            params.get_mut(id).value_mut().data_mut()[k] = original;
            let numeric = (plus? - minus?) / (2.0 * epsilon);
            let analytic = params.get(id).grad().data()[k];
            let err = (analytic - numeric).abs() / analytic.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
