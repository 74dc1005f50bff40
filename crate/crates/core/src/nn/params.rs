use std::collections::HashMap;
use std::fs;
use std::ops::Index;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Position of a tensor inside a [`ModelParams`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named learnable tensors in insertion order, each with a gradient buffer.
#[derive(Clone, Debug, Default)]
pub struct ModelParams {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl ModelParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter name `{name}`");
        let id = self.values.len();
        self.index.insert(name.clone(), id);
        self.grads.push(vec![0.0; value.len()]);
        self.names.push(name);
        self.values.push(value);
        ParamId(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.grads[id.0]
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| g.iter_mut().for_each(|v| *v = 0.0));
    }

    pub(crate) fn values_and_grads_mut(&mut self) -> (&[String], &mut [Tensor], &mut [Vec<f64>]) {
        (&self.names, &mut self.values, &mut self.grads)
    }

    /// Records every parameter as a gradient-tracked leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Bound<'t> {
        Bound {
            vars: self.values.iter().map(|v| tape.param(v.clone())).collect(),
        }
    }

    /// Records every parameter as a constant.
    pub fn bind_frozen<'t>(&self, tape: &'t Tape) -> Bound<'t> {
        Bound {
            vars: self.values.iter().map(|v| tape.leaf(v.clone())).collect(),
        }
    }

    /// Adds the swept tape gradients into the gradient buffers.
    pub fn accumulate_grads(&mut self, tape: &Tape, bound: &Bound<'_>) {
        for (g, var) in self.grads.iter_mut().zip(&bound.vars) {
            tape.accumulate_grad_into(*var, g);
        }
    }

    /// Replaces values from `other`, matching by name and shape.
    pub fn load_values_from(&mut self, other: &ModelParams) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::invalid(format!(
                "checkpoint has {} tensors, model expects {}",
                other.len(),
                self.len()
            )));
        }
        for (name, value) in self.names.iter().zip(self.values.iter_mut()) {
            let src = other
                .by_name(name)
                .ok_or_else(|| Error::Missing(format!("parameter `{name}` in checkpoint")))?;
            if src.shape() != value.shape() {
                return Err(Error::shape("checkpoint load", value.shape(), src.shape()));
            }
            *value = src.clone();
        }
        Ok(())
    }

    /// Writes one TNSR file per parameter plus `manifest.json`.
    pub fn save_checkpoint(&self, dir: impl AsRef<Path>, manifest: &CheckpointManifest) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (name, value) in self.iter() {
            value.save(dir.join(format!("{name}.tnsr")))?;
        }
        let mut manifest = manifest.clone();
        manifest.parameter_order = self.names.clone();
        manifest.parameter_count = self.parameter_count();
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(Self, CheckpointManifest)> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.json");
        if !manifest_path.exists() {
            return Err(Error::Missing(format!("checkpoint manifest {}", manifest_path.display())));
        }
        let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
        let mut params = ModelParams::new();
        for name in &manifest.parameter_order {
            params.add(name.clone(), Tensor::load(dir.join(format!("{name}.tnsr")))?);
        }
        if params.parameter_count() != manifest.parameter_count {
            return Err(Error::Format {
                path: manifest_path,
                reason: format!(
                    "manifest reports {} parameters, files hold {}",
                    manifest.parameter_count,
                    params.parameter_count()
                ),
            });
        }
        Ok((params, manifest))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckpointManifest {
    pub config: serde_json::Value,
    pub parameter_order: Vec<String>,
    pub variant: Option<String>,
    pub seed: u64,
    pub parameter_count: usize,
}

impl CheckpointManifest {
    pub fn new(config: serde_json::Value, variant: Option<String>, seed: u64) -> Self {
        Self {
            config,
            parameter_order: Vec::new(),
            variant,
            seed,
            parameter_count: 0,
        }
    }
}

/// Parameters recorded on one tape, indexed by [`ParamId`].
pub struct Bound<'t> {
    vars: Vec<Var<'t>>,
}

impl<'t> Index<ParamId> for Bound<'t> {
    type Output = Var<'t>;

    fn index(&self, id: ParamId) -> &Var<'t> {
        &self.vars[id.0]
    }
}
