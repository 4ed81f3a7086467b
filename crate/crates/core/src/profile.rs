//! Named configuration bundles: network specs, training settings, patch
//! plan, feature size, forest and synthetic-data settings. Two ship with the
//! crate, `paper` and `toy`; any other bundle is read from a TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attrclass::{AttributeScheme, FEATURE_PLANES};
use crate::dataio::SynthConfig;
use crate::error::{Error, Result};
use crate::faceseg::{PatchPlan, CLASS_COUNT};
use crate::importance::ForestConfig;
use crate::netkit::{paper_network, paper_network_sized, toy_network, NetworkSpec, TrainConfig};

pub const PAPER_PROFILE: &str = include_str!("../profiles/paper.toml");
pub const TOY_PROFILE: &str = include_str!("../profiles/toy.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationProfile {
    pub patch: PatchPlan,
    /// Training patches per class per image.
    pub per_class_quota: usize,
    pub normalize_illumination: bool,
    pub train: TrainConfig,
    pub network: NetworkSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeProfile {
    /// `[height, width]` of the feature planes.
    pub feature_size: [usize; 2],
    /// Optional fixed label set; datasets must then use exactly these labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<AttributeScheme>,
    pub train: TrainConfig,
    pub network: NetworkSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub segmentation: SegmentationProfile,
    pub attribute: AttributeProfile,
    pub forest: ForestConfig,
    pub synth: SynthConfig,
}

/// Hidden width of the first fully connected layer in the paper profile.
pub const PAPER_HIDDEN: usize = 512;

impl Profile {
    /// Published layer table and training values. Patches are 251 pixels so
    /// they have a center; the 5-plane attribute network keeps the 250x250
    /// input.
    pub fn paper_defaults() -> Self {
        Self {
            name: "paper".into(),
            segmentation: SegmentationProfile {
                patch: PatchPlan::new(251),
                per_class_quota: 10,
                normalize_illumination: true,
                train: TrainConfig::paper(),
                network: paper_network_sized(3, 251, CLASS_COUNT, PAPER_HIDDEN),
            },
            attribute: AttributeProfile {
                feature_size: [250, 250],
                scheme: None,
                train: TrainConfig::paper(),
                network: paper_network(FEATURE_PLANES, 2, PAPER_HIDDEN),
            },
            forest: ForestConfig::default(),
            synth: SynthConfig {
                size: 250,
                ..SynthConfig::default()
            },
        }
    }

    /// Desk-scale settings used by the tests and the synthetic benchmark.
    pub fn toy_defaults() -> Self {
        let train = |epochs, batch_size| TrainConfig {
            epochs,
            learning_rate: 0.05,
            momentum: 0.8,
            batch_size,
            seed: 0,
        };
        Self {
            name: "toy".into(),
            segmentation: SegmentationProfile {
                patch: PatchPlan::new(11),
                per_class_quota: 4,
                normalize_illumination: false,
                train: train(8, 32),
                network: toy_network([3, 11, 11], CLASS_COUNT),
            },
            attribute: AttributeProfile {
                feature_size: [32, 32],
                scheme: None,
                train: train(30, 16),
                network: toy_network([FEATURE_PLANES, 32, 32], 2),
            },
            forest: ForestConfig {
                trees: 100,
                max_depth: 8,
                ..ForestConfig::default()
            },
            synth: SynthConfig::default(),
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "paper" => PAPER_PROFILE,
            "toy" => TOY_PROFILE,
            other => return Err(Error::Config(format!("unknown profile `{other}` (built in: paper, toy)"))),
        };
        Self::from_toml(text)
    }

    /// A built-in name, or a path to a TOML profile.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "paper" | "toy" => Self::builtin(name_or_path),
            path => {
                let path = Path::new(path);
                if !path.is_file() {
                    return Err(Error::Config(format!(
                        "unknown profile `{}` (built in: paper, toy; or a TOML file)",
                        path.display()
                    )));
                }
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let profile: Profile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Every check that can run before data is touched.
    pub fn validate(&self) -> Result<()> {
        let seg = &self.segmentation;
        seg.patch.validate()?;
        seg.train.validate()?;
        if seg.per_class_quota == 0 {
            return Err(Error::Config("segmentation.per_class_quota must be at least 1".into()));
        }
        let want = [seg.network.input_shape[0], seg.patch.size, seg.patch.size];
        if seg.network.input_shape != want {
            return Err(Error::Config(format!(
                "segmentation network input {:?} does not match {}x{} patches",
                seg.network.input_shape, seg.patch.size, seg.patch.size
            )));
        }
        if seg.network.class_count != CLASS_COUNT {
            return Err(Error::Config(format!(
                "segmentation network must output {CLASS_COUNT} classes, not {}",
                seg.network.class_count
            )));
        }
        seg.network.resolve_padding()?.infer_shapes()?;

        let attr = &self.attribute;
        attr.train.validate()?;
        let [fh, fw] = attr.feature_size;
        if attr.network.input_shape != [FEATURE_PLANES, fh, fw] {
            return Err(Error::Config(format!(
                "attribute network input {:?} must be [{FEATURE_PLANES}, {fh}, {fw}]",
                attr.network.input_shape
            )));
        }
        if let Some(scheme) = &attr.scheme {
            scheme.validate()?;
            if scheme.class_count() != attr.network.class_count {
                return Err(Error::Config(format!(
                    "attribute scheme has {} labels but the network outputs {}",
                    scheme.class_count(),
                    attr.network.class_count
                )));
            }
        }
        attr.network.resolve_padding()?.infer_shapes()?;
        self.forest.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    /// Attribute network resized to `k` labels.
    pub fn attribute_network(&self, k: usize) -> Result<NetworkSpec> {
        if let Some(s) = &self.attribute.scheme {
            if s.class_count() != k {
                return Err(Error::Config(format!(
                    "profile scheme `{}` has {} labels, dataset has {k}",
                    s.name,
                    s.class_count()
                )));
            }
        }
        Ok(self.attribute.network.with_class_count(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_files_match_builders() {
        assert_eq!(Profile::builtin("paper").unwrap(), Profile::paper_defaults());
        assert_eq!(Profile::builtin("toy").unwrap(), Profile::toy_defaults());
    }

    #[test]
    fn unknown_profile_rejected() {
        assert!(Profile::builtin("huge").is_err());
    }

    #[test]
    fn odd_patch_enforced() {
        let mut p = Profile::toy_defaults();
        p.segmentation.patch.size = 10;
        assert!(p.validate().is_err());
    }
}
