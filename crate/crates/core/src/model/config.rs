use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{CHANNELS_PER_JOINT, JOINTS, WINDOW_STEPS};
use crate::error::{Error, Result};

pub const KERNEL_SIZE: usize = 3;

/// The five architectures of the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "MAD")]
    Mad,
    #[serde(rename = "M")]
    M,
    #[serde(rename = "MD")]
    Md,
    #[serde(rename = "MA")]
    Ma,
    #[serde(rename = "AD")]
    Ad,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Mad, Variant::M, Variant::Md, Variant::Ma, Variant::Ad];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mad => "MAD",
            Variant::M => "M",
            Variant::Md => "MD",
            Variant::Ma => "MA",
            Variant::Ad => "AD",
        }
    }

    /// `(modularization, dilation, attention)`.
    pub fn flags(self) -> (bool, bool, bool) {
        match self {
            Variant::Mad => (true, true, true),
            Variant::M => (true, false, false),
            Variant::Md => (true, true, false),
            Variant::Ma => (true, false, true),
            Variant::Ad => (false, true, true),
        }
    }

    fn from_flags(flags: (bool, bool, bool)) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.flags() == flags)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let key = upper.trim_end_matches("-CNN");
        Self::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::Input(format!("unknown variant `{s}` (expected MAD, M, MD, MA or AD)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub use_modularization: bool,
    pub use_dilation: bool,
    pub use_attention: bool,
    pub joints: usize,
    pub window_steps: usize,
    pub channels_per_joint: usize,
    pub conv_filters: [usize; 2],
    pub dilations: [usize; 2],
    pub joint_fc_dim: usize,
    pub head_fc_dim: usize,
    pub classes: usize,
}

pub fn variant_config(name: &str) -> Result<ModelConfig> {
    Ok(ModelConfig::for_variant(name.parse()?))
}

impl ModelConfig {
    pub fn for_variant(variant: Variant) -> Self {
        let (m, d, a) = variant.flags();
        Self {
            use_modularization: m,
            use_dilation: d,
            use_attention: a,
            joints: JOINTS,
            window_steps: WINDOW_STEPS,
            channels_per_joint: CHANNELS_PER_JOINT,
            conv_filters: [16, 32],
            dilations: if d { [4, 8] } else { [1, 1] },
            joint_fc_dim: 32,
            head_fc_dim: 64,
            classes: 2,
        }
    }

    pub fn variant(&self) -> Result<Variant> {
        Variant::from_flags((self.use_modularization, self.use_dilation, self.use_attention))
            .ok_or_else(|| Error::Config("flag combination is not one of the five variants".into()))
    }

    /// The config must equal the canonical config of its variant.
    pub fn validate(&self) -> Result<()> {
        let variant = self.variant()?;
        if *self != Self::for_variant(variant) {
            return Err(Error::Config(format!(
                "config does not match the {variant} architecture"
            )));
        }
        Ok(())
    }

    pub fn branches(&self) -> usize {
        if self.use_modularization {
            self.joints
        } else {
            1
        }
    }

    pub fn branch_in_channels(&self) -> usize {
        if self.use_modularization {
            self.channels_per_joint
        } else {
            self.joints * self.channels_per_joint
        }
    }

    /// Length after each conv + pool stage.
    pub fn pooled_lengths(&self) -> [usize; 2] {
        let l1 = self.window_steps / 2;
        [l1, l1 / 2]
    }

    pub fn branch_flatten_dim(&self) -> usize {
        self.conv_filters[1] * self.pooled_lengths()[1]
    }

    pub fn branch_fc_dim(&self) -> usize {
        self.fused_dim() / self.branches()
    }

    /// Width of the concatenated joint features (`tokens × token_dim`).
    pub fn fused_dim(&self) -> usize {
        self.joints * self.joint_fc_dim
    }

    pub fn tokens(&self) -> usize {
        self.joints
    }

    pub fn token_dim(&self) -> usize {
        self.joint_fc_dim
    }

    pub fn frame_len(&self) -> usize {
        self.joints * self.channels_per_joint * self.window_steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_flags() {
        let c = variant_config("MAD").unwrap();
        assert_eq!((c.use_modularization, c.use_dilation, c.use_attention), (true, true, true));
        let c = variant_config("M").unwrap();
        assert_eq!((c.use_modularization, c.use_dilation, c.use_attention), (true, false, false));
        let c = variant_config("AD").unwrap();
        assert_eq!((c.use_modularization, c.use_dilation, c.use_attention), (false, true, true));
        let c = variant_config("MD").unwrap();
        assert_eq!(c.dilations, [4, 8]);
        let c = variant_config("MA").unwrap();
        assert_eq!(c.dilations, [1, 1]);
    }

    #[test]
    fn unknown_variant() {
        assert!(matches!(variant_config("XYZ"), Err(Error::Input(_))));
    }

    #[test]
    fn suffix_and_case_accepted() {
        assert_eq!("mad-cnn".parse::<Variant>().unwrap(), Variant::Mad);
    }

    #[test]
    fn non_table_flags_rejected() {
        let mut c = ModelConfig::for_variant(Variant::Ad);
        c.use_attention = false;
        assert!(c.validate().is_err());
    }

    #[test]
    fn derived_dims() {
        let mad = ModelConfig::for_variant(Variant::Mad);
        assert_eq!(mad.pooled_lengths(), [5, 2]);
        assert_eq!(mad.branch_flatten_dim(), 64);
        assert_eq!(mad.branch_fc_dim(), 32);
        let ad = ModelConfig::for_variant(Variant::Ad);
        assert_eq!(ad.branch_in_channels(), 4);
        assert_eq!(ad.branch_fc_dim(), 64);
    }
}
