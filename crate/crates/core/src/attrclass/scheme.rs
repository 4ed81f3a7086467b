use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named, ordered label set for the second-stage classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeScheme {
    pub name: String,
    pub labels: Vec<String>,
}

impl AttributeScheme {
    pub fn new(name: impl Into<String>, labels: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        let scheme = Self {
            name: name.into(),
            labels: labels.into_iter().map(Into::into).collect(),
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() < 2 {
            return Err(Error::Config(format!("scheme `{}` needs at least two labels", self.name)));
        }
        for (i, label) in self.labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(Error::Config(format!("scheme `{}` has an empty label at {i}", self.name)));
            }
            if self.labels[..i].contains(label) {
                return Err(Error::Config(format!("scheme `{}` repeats label `{label}`", self.name)));
            }
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}
