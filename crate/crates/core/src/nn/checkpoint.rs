use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layout, ModuleTag, ParamVector};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Saved parameters of every learned module of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Free-form label such as `generic` or `agent-3`.
    pub kind: String,
    pub trained_steps: u64,
    pub models: Vec<ParamVector>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, trained_steps: u64, models: Vec<ParamVector>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            kind: kind.into(),
            trained_steps,
            models,
        }
    }

    pub fn model(&self, tag: ModuleTag) -> Option<&ParamVector> {
        self.models.iter().find(|m| m.layout.tag == tag)
    }

    /// Returns the parameters for `layout`, failing on absent or mismatched
    /// architecture.
    pub fn params_for(&self, layout: &Layout) -> Result<ParamVector> {
        let m = self
            .model(layout.tag)
            .ok_or_else(|| Error::Checkpoint(format!("no {:?} model in checkpoint", layout.tag)))?;
        m.layout.ensure_compatible(layout)?;
        if m.values.len() != layout.len {
            return Err(Error::Checkpoint("parameter count does not match layout".into()));
        }
        Ok(m.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(&fs::read_to_string(path)?)?;
        if c.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                c.format_version
            )));
        }
        if let Some(bad) = c.models.iter().find(|m| m.values.len() != m.layout.len) {
            return Err(Error::Checkpoint(format!("{:?} model is truncated", bad.layout.tag)));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(tag: ModuleTag, n: usize) -> ParamVector {
        let mut l = Layout::new(tag);
        l.push("w", &[n]);
        let mut p = ParamVector::zeros(l);
        p.values.iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.1 + 1e-17);
        p
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let c = Checkpoint::new("generic", 42, vec![pv(ModuleTag::ActorCritic, 5), pv(ModuleTag::Credit, 3)]);
        c.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
    }

    #[test]
    fn architecture_mismatch_errors() {
        let c = Checkpoint::new("generic", 0, vec![pv(ModuleTag::ActorCritic, 5)]);
        assert!(c.params_for(&pv(ModuleTag::ActorCritic, 6).layout).is_err());
        assert!(c.params_for(&pv(ModuleTag::Credit, 5).layout).is_err());
        assert!(c.params_for(&pv(ModuleTag::ActorCritic, 5).layout).is_ok());
    }
}
