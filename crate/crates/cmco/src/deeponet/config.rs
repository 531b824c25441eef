//! Branch and trunk architecture descriptors.

use serde::{Deserialize, Serialize};

use crate::error::{CmcoError, Result};
use crate::nn::dense::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Gru,
    Lstm,
}

impl BranchKind {
    pub fn gate_blocks(&self) -> usize {
        match self {
            BranchKind::Gru => 3,
            BranchKind::Lstm => 4,
        }
    }
}

/// Recurrent encoder for the input sequence. The embedding is the final
/// time-step hidden state of the top layer, optionally layer-normalized, so
/// the embedding size equals `hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    pub kind: BranchKind,
    pub input_channels: usize,
    pub hidden: usize,
    pub layers: usize,
    /// Applied between stacked recurrent layers (not inside gates, not after
    /// the top layer); inert when `layers == 1`.
    pub dropout: f64,
    pub layer_norm: bool,
}

impl BranchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden < 1 || self.layers < 1 || self.input_channels < 1 {
            return Err(CmcoError::InvalidConfig(format!(
                "branch needs hidden >= 1, layers >= 1, channels >= 1 (got H={}, L={}, C={})",
                self.hidden, self.layers, self.input_channels
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(CmcoError::InvalidConfig(format!(
                "branch dropout must satisfy 0 <= p < 1, got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Dense stack mapping a query coordinate to the embedding space. Hidden
/// layers carry the activation and dropout; the final projection to the
/// embedding width is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrunkConfig {
    /// `[d, w1, ..., wk, q]`; first entry is the query dimension, last the
    /// embedding size.
    pub widths: Vec<usize>,
    pub activation: Activation,
    /// Applied after each hidden layer's activation.
    pub dropout: f64,
}

impl TrunkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(CmcoError::InvalidConfig(format!(
                "trunk needs at least [d, q] widths, got {:?}",
                self.widths
            )));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(CmcoError::InvalidConfig(format!(
                "trunk widths must be positive, got {:?}",
                self.widths
            )));
        }
        if matches!(self.activation, Activation::None) {
            return Err(CmcoError::InvalidConfig(
                "trunk activation must be tanh or relu".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(CmcoError::InvalidConfig(format!(
                "trunk dropout must satisfy 0 <= p < 1, got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    pub fn query_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn embedding_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

/// Trainable-parameter total implied by the configs: per recurrent layer
/// `gates * (I*H + H*H + 2H)`, plus `2H` for layer norm, plus
/// `w_i * w_{i+1} + w_{i+1}` per trunk layer, plus the scalar output bias.
pub fn closed_form_param_count(branch: &BranchConfig, trunk: &TrunkConfig) -> usize {
    let h = branch.hidden;
    let gates = branch.kind.gate_blocks();
    let mut total = 0;
    let mut input = branch.input_channels;
    for _ in 0..branch.layers {
        total += gates * (input * h + h * h + 2 * h);
        input = h;
    }
    if branch.layer_norm {
        total += 2 * h;
    }
    for pair in trunk.widths.windows(2) {
        total += pair[0] * pair[1] + pair[1];
    }
    total + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gru_branch(c: usize, h: usize, l: usize) -> BranchConfig {
        BranchConfig {
            kind: BranchKind::Gru,
            input_channels: c,
            hidden: h,
            layers: l,
            dropout: 0.1,
            layer_norm: true,
        }
    }

    #[test]
    fn hand_counted_tiny_configs() {
        // 3*(1*2 + 2*2 + 2*2) + 2*2 + (2*2 + 2) + 1 = 41
        let trunk = TrunkConfig {
            widths: vec![2, 2],
            activation: Activation::Tanh,
            dropout: 0.0,
        };
        assert_eq!(closed_form_param_count(&gru_branch(1, 2, 1), &trunk), 41);

        // 3*(1 + 1 + 2) + 2 + (2*1 + 1) + 1 = 18
        let trunk = TrunkConfig {
            widths: vec![2, 1],
            activation: Activation::Tanh,
            dropout: 0.0,
        };
        assert_eq!(closed_form_param_count(&gru_branch(1, 1, 1), &trunk), 18);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut b = gru_branch(1, 2, 1);
        b.dropout = 1.0;
        assert!(b.validate().is_err());
        let t = TrunkConfig {
            widths: vec![2],
            activation: Activation::Relu,
            dropout: 0.0,
        };
        assert!(t.validate().is_err());
    }
}
