//! Compute and data-volume geometry of a transformer split at a cut layer.
//!
//! The device always runs the embedding stage plus transformer layers
//! `1..=c`; the server runs layers `c+1..=I` plus the output head. Every
//! transformer layer is assumed to carry the same workload and to emit an
//! activation tensor of the same shape, so all per-cut quantities are affine
//! in `c`.
//!
//! FLOP counts are per local epoch (one forward and backward pass over a
//! mini-batch) and are stored as integers so that
//! `device_flops(c) + server_flops(c) == total_flops()` holds exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmProfile {
    /// Number of transformer layers `I`; valid cuts are `0..=I`.
    pub num_layers: u32,
    pub flops_embedding: u64,
    pub flops_per_layer: u64,
    pub flops_head: u64,
    /// Activation size (bits) crossing the cut, uplink.
    pub smashed_bits_per_layer: u64,
    /// Activation-gradient size (bits) crossing the cut, downlink.
    pub grad_bits_per_layer: u64,
    /// Size (bits) of the LoRA adapters attached to one transformer layer.
    pub adapter_bits_per_layer: u64,
    pub lora_rank: u32,
}

impl LlmProfile {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::validation(
                "profile.num_layers",
                "must be at least 1",
            ));
        }
        if self.flops_per_layer == 0 {
            return Err(Error::validation(
                "profile.flops_per_layer",
                "must be positive",
            ));
        }
        let total = u64::from(self.num_layers)
            .checked_mul(self.flops_per_layer)
            .and_then(|t| t.checked_add(self.flops_embedding))
            .and_then(|t| t.checked_add(self.flops_head));
        if total.is_none() {
            return Err(Error::validation("profile", "total FLOPs overflow 64 bits"));
        }
        if u64::from(self.num_layers)
            .checked_mul(self.adapter_bits_per_layer)
            .is_none()
        {
            return Err(Error::validation(
                "profile.adapter_bits_per_layer",
                "total adapter size overflows 64 bits",
            ));
        }
        Ok(())
    }

    fn check_cut(&self, cut: u32) -> Result<()> {
        if cut > self.num_layers {
            return Err(Error::CutOutOfRange {
                cut,
                num_layers: self.num_layers,
            });
        }
        Ok(())
    }

    /// Total FLOPs of the whole model per local epoch.
    pub fn total_flops(&self) -> u64 {
        self.flops_embedding + u64::from(self.num_layers) * self.flops_per_layer + self.flops_head
    }

    pub fn device_flops(&self, cut: u32) -> Result<u64> {
        self.check_cut(cut)?;
        Ok(self.flops_embedding + u64::from(cut) * self.flops_per_layer)
    }

    pub fn server_flops(&self, cut: u32) -> Result<u64> {
        self.check_cut(cut)?;
        Ok(u64::from(self.num_layers - cut) * self.flops_per_layer + self.flops_head)
    }

    pub fn smashed_bits(&self, cut: u32) -> Result<u64> {
        self.check_cut(cut)?;
        Ok(self.smashed_bits_per_layer)
    }

    pub fn grad_bits(&self, cut: u32) -> Result<u64> {
        self.check_cut(cut)?;
        Ok(self.grad_bits_per_layer)
    }

    /// Bits of device-side adapters shipped in each direction per round.
    pub fn adapter_bits(&self, cut: u32) -> Result<u64> {
        self.check_cut(cut)?;
        Ok(u64::from(cut) * self.adapter_bits_per_layer)
    }

    /// True when some transfer carries data at one or more cut layers.
    pub fn has_payload(&self) -> bool {
        self.smashed_bits_per_layer > 0
            || self.grad_bits_per_layer > 0
            || self.adapter_bits_per_layer > 0
    }
}

impl Default for LlmProfile {
    fn default() -> Self {
        default_llama_profile()
    }
}

/// Architecture and workload knobs from which an [`LlmProfile`] is derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformerShape {
    pub num_layers: u32,
    pub hidden_dim: u64,
    pub vocab_size: u64,
    pub batch_size: u64,
    pub seq_len: u64,
    pub lora_rank: u64,
    /// Weight matrices per layer that carry an adapter pair.
    pub adapted_matrices_per_layer: u64,
    pub activation_bits: u64,
    pub adapter_param_bits: u64,
}

impl TransformerShape {
    /// LLaMA-3.2-1B-like decoder with 32 layers and a 4 x 512 token mini-batch.
    pub fn llama_1b() -> Self {
        Self {
            num_layers: 32,
            hidden_dim: 2048,
            vocab_size: 128_256,
            batch_size: 4,
            seq_len: 512,
            lora_rank: 8,
            adapted_matrices_per_layer: 2,
            activation_bits: 16,
            adapter_param_bits: 32,
        }
    }

    pub fn tokens(&self) -> u64 {
        self.batch_size * self.seq_len
    }

    /// 4h^2 attention + 8h^2 MLP.
    pub fn params_per_layer(&self) -> u64 {
        12 * self.hidden_dim * self.hidden_dim
    }

    /// Forward costs 2 FLOPs per parameter per token; backward through the
    /// frozen trunk costs about twice the forward.
    fn train_flops(&self, params: u64) -> u64 {
        3 * 2 * params * self.tokens()
    }

    /// Bits of one rank-Z (A, B) pair on a P x Q matrix, times the adapted matrix count.
    pub fn adapter_bits_per_layer(&self, rows: u64, cols: u64) -> u64 {
        self.adapted_matrices_per_layer * self.lora_rank * (rows + cols) * self.adapter_param_bits
    }

    pub fn profile(&self) -> LlmProfile {
        let activation = self.tokens() * self.hidden_dim * self.activation_bits;
        LlmProfile {
            num_layers: self.num_layers,
            // Embedding lookup is a gather; charge one multiply-add per output element.
            flops_embedding: self.train_flops(self.hidden_dim),
            flops_per_layer: self.train_flops(self.params_per_layer()),
            flops_head: self.train_flops(self.hidden_dim * self.vocab_size),
            smashed_bits_per_layer: activation,
            grad_bits_per_layer: activation,
            adapter_bits_per_layer: self.adapter_bits_per_layer(self.hidden_dim, self.hidden_dim),
            lora_rank: self.lora_rank as u32,
        }
    }
}

pub fn default_llama_profile() -> LlmProfile {
    TransformerShape::llama_1b().profile()
}
