use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModuleTag {
    ActorCritic,
    Supervised,
    Curiosity,
    Credit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Where each named tensor lives inside a flat parameter array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub tag: ModuleTag,
    pub tensors: Vec<TensorSpec>,
    pub len: usize,
}

impl Layout {
    pub fn new(tag: ModuleTag) -> Self {
        Self {
            tag,
            tensors: Vec::new(),
            len: 0,
        }
    }

    /// Appends a tensor and returns its offset.
    pub fn push(&mut self, name: impl Into<String>, shape: &[usize]) -> usize {
        let offset = self.len;
        let spec = TensorSpec {
            name: name.into(),
            shape: shape.to_vec(),
            offset,
        };
        self.len += spec.len();
        self.tensors.push(spec);
        offset
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn ensure_compatible(&self, other: &Layout) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(format!(
                "{:?} layout with {} params vs {:?} layout with {} params",
                self.tag, self.len, other.tag, other.len
            )))
        }
    }
}

/// Flat parameters plus their layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Layout) -> Self {
        let values = vec![0.0; layout.len];
        Self { layout, values }
    }

    /// Glorot-uniform weights, zero biases (rank-1 tensors).
    pub fn glorot(layout: Layout, rng: &mut SimRng) -> Self {
        let mut p = Self::zeros(layout);
        for t in p.layout.tensors.clone() {
            if t.shape.len() == 2 {
                let limit = (6.0 / (t.shape[0] + t.shape[1]) as f64).sqrt();
                for v in &mut p.values[t.offset..t.offset + t.len()] {
                    *v = rng.random_range(-limit..limit);
                }
            }
        }
        p
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let t = self.layout.tensor(name)?.clone();
        Some(&mut self.values[t.offset..t.offset + t.len()])
    }

    pub fn scale_tensor(&mut self, name: &str, factor: f64) {
        if let Some(s) = self.tensor_mut(name) {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// A gradient handed from an agent to the coordinator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    pub agent: usize,
    pub shot: u64,
}

impl Gradient {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
