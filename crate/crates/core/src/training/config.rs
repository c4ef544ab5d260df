use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::DEFAULT_VOCAB_SIZE;
use crate::models::{ModelDims, ModelKind};
use crate::nn::AdamConfig;
use crate::{Error, Result};

/// How `loss_trans` compares `z_bar_L` with `x_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransLoss {
    /// `||z_bar_L - x_T||^2`
    #[default]
    Squared,
    /// `||z_bar_L - x_T||`
    Norm,
}

/// When profile texts are reshuffled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileShuffle {
    #[default]
    OncePerBuild,
    PerEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub dims: ModelDims,
    /// M, regular tokens kept in the vocabulary
    pub vocab_size: usize,
    pub batch_size: usize,
    /// evaluate every this many batches
    pub eval_every: usize,
    pub lr: f64,
    pub keep_prob: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub trans_loss: TransLoss,
    pub profile_shuffle: ProfileShuffle,
    /// Step 3 recomputes `z_bar_L` with a fresh dropout mask instead of
    /// reusing the step-2 value.
    pub fresh_step3_mask: bool,
    /// Diagnostic: minimize `loss_T + loss_trans + loss_S` in one update.
    pub joint_training: bool,
    /// Diagnostic: evaluation profiles also contain the held-out joint review.
    pub test_reviews: bool,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::TransNet,
            dims: ModelDims::default(),
            vocab_size: DEFAULT_VOCAB_SIZE,
            batch_size: 500,
            eval_every: 1000,
            lr: 0.002,
            keep_prob: 0.5,
            max_epochs: 3,
            seed: 0,
            trans_loss: TransLoss::Squared,
            profile_shuffle: ProfileShuffle::OncePerBuild,
            fresh_step3_mask: false,
            joint_training: false,
            test_reviews: false,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    /// CPU-scale profile.
    pub fn desk() -> Self {
        Self {
            dims: ModelDims::desk(),
            vocab_size: 2000,
            batch_size: 32,
            eval_every: 50,
            max_epochs: 30,
            ..Self::default()
        }
    }

    /// Every problem with the configuration, in field order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.model.uses_text() {
            out.extend(self.dims.validate());
        } else if self.dims.latent == 0 {
            out.push(String::from("latent must be positive"));
        }
        for (name, v) in [
            ("vocab_size", self.vocab_size),
            ("batch_size", self.batch_size),
            ("eval_every", self.eval_every),
            ("max_epochs", self.max_epochs),
        ] {
            if v == 0 {
                out.push(format!("{name} must be positive"));
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            out.push(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            out.push(format!("keep_prob must be in (0, 1], got {}", self.keep_prob));
        }
        let AdamConfig { beta1, beta2, eps } = self.adam;
        if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
            out.push(String::from("adam betas must be in [0, 1) and eps positive"));
        }
        if self.test_reviews && !matches!(self.model, ModelKind::DeepConn | ModelKind::DeepConnRevAb) {
            out.push(String::from("test_reviews is a DeepCoNN-only diagnostic"));
        }
        if self.joint_training && !self.model.is_transnet() {
            out.push(String::from("joint_training applies to transnet models only"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_size_defaults() {
        let c = TrainConfig::default();
        assert_eq!(
            (
                c.dims.filters,
                c.dims.window,
                c.dims.latent,
                c.dims.seq_len,
                c.dims.embed_dim
            ),
            (100, 3, 50, 1000, 64)
        );
        assert_eq!(
            (c.vocab_size, c.batch_size, c.eval_every, c.dims.layers, c.dims.fm_rank),
            (50_000, 500, 1000, 2, 8)
        );
        assert_eq!((c.lr, c.keep_prob), (0.002, 0.5));
        assert!(c.problems().is_empty());
    }

    #[test]
    fn desk_profile() {
        let c = TrainConfig::desk();
        assert_eq!(
            (
                c.dims.seq_len,
                c.dims.filters,
                c.dims.latent,
                c.dims.embed_dim,
                c.vocab_size,
                c.batch_size,
                c.eval_every
            ),
            (64, 8, 8, 16, 2000, 32, 50)
        );
    }

    #[test]
    fn lists_every_problem() {
        let c = TrainConfig {
            batch_size: 0,
            keep_prob: 0.0,
            lr: -1.0,
            ..TrainConfig::desk()
        };
        assert_eq!(c.problems().len(), 3);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
