use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DiffError, Tensor};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// A named trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    name: String,
    value: Tensor,
    grad: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.rows(), value.cols());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut Tensor {
        &mut self.grad
    }

    /// Mutable access to value and gradient at once, for optimizers.
    pub fn value_and_grad_mut(&mut self) -> (&mut Tensor, &Tensor) {
        (&mut self.value, &self.grad)
    }
}

/// Ordered collection of parameters. Ids are insertion indices; names are unique.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, DiffError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(DiffError::DuplicateParameter(name));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter::new(name, value));
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Parameter)> {
        self.params.iter_mut().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Parameter names in sorted order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.by_name.keys().map(String::as_str)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn to_checkpoint(&self, dims: BTreeMap<String, usize>) -> ParamCheckpoint {
        let tensors = self
            .params
            .iter()
            .map(|p| (p.name.clone(), p.value.to_rows()))
            .collect();
        ParamCheckpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            dims,
            tensors,
        }
    }

    /// Rebuild a store from a checkpoint. Parameters are inserted in sorted name order.
    pub fn from_checkpoint(ckpt: &ParamCheckpoint) -> Result<Self, DiffError> {
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(DiffError::Checkpoint(format!(
                "unsupported format_version {}",
                ckpt.format_version
            )));
        }
        let mut store = Self::new();
        for (name, rows) in &ckpt.tensors {
            let value = Tensor::from_rows(rows)
                .map_err(|e| DiffError::Checkpoint(format!("tensor {name}: {e}")))?;
            store.insert(name.clone(), value)?;
        }
        Ok(store)
    }
}

/// Stores are equal when they hold the same names with equal values and
/// gradients, regardless of insertion order.
impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.by_name.len() == other.by_name.len()
            && self
                .by_name
                .iter()
                .all(|(name, &id)| other.by_name(name).is_some_and(|p| p == self.get(id)))
    }
}

/// JSON parameter checkpoint. `BTreeMap` keeps keys sorted on output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheckpoint {
    pub format_version: u32,
    pub dims: BTreeMap<String, usize>,
    pub tensors: BTreeMap<String, Vec<Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_json_round_trips_exactly() {
        let mut store = ParamStore::new();
        store
            .insert(
                "w",
                Tensor::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-17, 123456.789012345]]).unwrap(),
            )
            .unwrap();
        store.insert("b", Tensor::row_vector(vec![std::f64::consts::PI])).unwrap();
        let ckpt = store.to_checkpoint(BTreeMap::from([("d".to_string(), 2)]));
        let json = serde_json::to_string(&ckpt).unwrap();
        let back: ParamCheckpoint = serde_json::from_str(&json).unwrap();
        let restored = ParamStore::from_checkpoint(&back).unwrap();
        for name in ["w", "b"] {
            assert_eq!(
                restored.by_name(name).unwrap().value(),
                store.by_name(name).unwrap().value()
            );
        }
        // sorted keys
        assert!(json.find("\"b\"").unwrap() < json.find("\"w\"").unwrap());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut store = ParamStore::new();
        store.insert("a", Tensor::zeros(1, 1)).unwrap();
        assert!(matches!(
            store.insert("a", Tensor::zeros(1, 1)),
            Err(DiffError::DuplicateParameter(_))
        ));
    }
}
