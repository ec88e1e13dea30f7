//! Graph ConvNet edge selector: anisotropic gated message passing over the
//! solution graph, residual node/edge updates with batch normalization, and
//! a two-layer edge classifier head producing per-edge probabilities.

pub mod batch;
mod net;

pub use batch::{build_graph, GraphBatch, GraphMode, NUM_ARC_TYPES};
pub use net::{convnet_backward, convnet_forward, convnet_loss};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

pub const NODE_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvNetConfig {
    /// Embedding width h (even; the distance embedding uses h/2).
    pub hidden: usize,
    /// Message-passing layers stacked.
    pub layers: usize,
    /// Stabilizer in the attention normalization.
    pub eta_eps: f64,
    /// Stabilizer inside batch normalization.
    pub bn_eps: f64,
    /// Running-statistics momentum.
    pub bn_momentum: f64,
}

impl Default for ConvNetConfig {
    fn default() -> Self {
        ConvNetConfig { hidden: 64, layers: 4, eta_eps: 1e-20, bn_eps: 1e-5, bn_momentum: 0.1 }
    }
}

impl ConvNetConfig {
    pub fn small(hidden: usize, layers: usize) -> Self {
        ConvNetConfig { hidden, layers, ..Default::default() }
    }
}

/// All learnable parameters live in one flat buffer addressed through
/// [`Layout`]; batch-norm running statistics live in `running`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvNetModel {
    pub config: ConvNetConfig,
    pub params: Vec<f64>,
    pub running: Vec<f64>,
    /// Optimizer steps applied so far (informational).
    pub steps: u64,
}

impl ConvNetModel {
    pub fn new<R: Rng>(config: ConvNetConfig, rng: &mut R) -> Self {
        assert!(config.hidden >= 2 && config.hidden % 2 == 0, "hidden width must be even");
        assert!(config.layers >= 1);
        let layout = Layout::new(config.hidden, config.layers);
        let mut params = vec![0.0; layout.total];
        let h = config.hidden;

        let mut init_matrix =
            |range: Range<usize>, fan_in: usize, fan_out: usize, params: &mut Vec<f64>| {
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for p in &mut params[range] {
                    *p = rng.gen_range(-bound..bound);
                }
            };
        init_matrix(layout.node_embed_w(), NODE_FEATURES, h, &mut params);
        init_matrix(layout.dist_embed_w(), 1, h / 2, &mut params);
        init_matrix(layout.type_embed(), 1, h / 2, &mut params);
        for l in 0..config.layers {
            for w in 0..5 {
                init_matrix(layout.layer_w(l, w), h, h, &mut params);
            }
            // batch-norm scale starts at one
            for g in &mut params[layout.bn_gamma(l, BnKind::Node)] {
                *g = 1.0;
            }
            for g in &mut params[layout.bn_gamma(l, BnKind::Edge)] {
                *g = 1.0;
            }
        }
        init_matrix(layout.head1_w(), h, h, &mut params);
        init_matrix(layout.head2_w(), h, 1, &mut params);

        let mut running = vec![0.0; layout.running_total];
        for l in 0..config.layers {
            for v in &mut running[layout.run_var(l, BnKind::Node)] {
                *v = 1.0;
            }
            for v in &mut running[layout.run_var(l, BnKind::Edge)] {
                *v = 1.0;
            }
        }
        ConvNetModel { config, params, running, steps: 0 }
    }

    pub(crate) fn layout(&self) -> Layout {
        Layout::new(self.config.hidden, self.config.layers)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BnKind {
    Node,
    Edge,
}

/// Offsets of every tensor inside the flat parameter buffer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub h: usize,
    pub h2: usize,
    pub layers: usize,
    node_embed_w: usize,
    node_embed_b: usize,
    dist_embed_w: usize,
    dist_embed_b: usize,
    type_embed: usize,
    layer_base: usize,
    layer_size: usize,
    head1_w: usize,
    head1_b: usize,
    head2_w: usize,
    head2_b: usize,
    pub total: usize,
    pub running_total: usize,
}

impl Layout {
    pub fn new(h: usize, layers: usize) -> Self {
        let h2 = h / 2;
        let mut cursor = 0usize;
        let mut take = |len: usize| {
            let at = cursor;
            cursor += len;
            at
        };
        let node_embed_w = take(h * NODE_FEATURES);
        let node_embed_b = take(h);
        let dist_embed_w = take(h2);
        let dist_embed_b = take(h2);
        let type_embed = take(NUM_ARC_TYPES * h2);
        // per layer: W1..W5 then node gamma/beta then edge gamma/beta
        let layer_size = 5 * h * h + 4 * h;
        let layer_base = take(layers * layer_size);
        let head1_w = take(h * h);
        let head1_b = take(h);
        let head2_w = take(h);
        let head2_b = take(1);
        Layout {
            h,
            h2,
            layers,
            node_embed_w,
            node_embed_b,
            dist_embed_w,
            dist_embed_b,
            type_embed,
            layer_base,
            layer_size,
            head1_w,
            head1_b,
            head2_w,
            head2_b,
            total: cursor,
            running_total: layers * 4 * h,
        }
    }

    pub fn node_embed_w(&self) -> Range<usize> {
        self.node_embed_w..self.node_embed_w + self.h * NODE_FEATURES
    }
    pub fn node_embed_b(&self) -> Range<usize> {
        self.node_embed_b..self.node_embed_b + self.h
    }
    pub fn dist_embed_w(&self) -> Range<usize> {
        self.dist_embed_w..self.dist_embed_w + self.h2
    }
    pub fn dist_embed_b(&self) -> Range<usize> {
        self.dist_embed_b..self.dist_embed_b + self.h2
    }
    pub fn type_embed(&self) -> Range<usize> {
        self.type_embed..self.type_embed + NUM_ARC_TYPES * self.h2
    }
    pub fn type_row(&self, ty: usize) -> Range<usize> {
        let at = self.type_embed + ty * self.h2;
        at..at + self.h2
    }

    /// Weight matrix `which` (0..5 for W1..W5) of layer `l`.
    pub fn layer_w(&self, l: usize, which: usize) -> Range<usize> {
        let at = self.layer_base + l * self.layer_size + which * self.h * self.h;
        at..at + self.h * self.h
    }
    pub fn bn_gamma(&self, l: usize, kind: BnKind) -> Range<usize> {
        let base = self.layer_base + l * self.layer_size + 5 * self.h * self.h;
        let at = match kind {
            BnKind::Node => base,
            BnKind::Edge => base + 2 * self.h,
        };
        at..at + self.h
    }
    pub fn bn_beta(&self, l: usize, kind: BnKind) -> Range<usize> {
        let g = self.bn_gamma(l, kind);
        g.end..g.end + self.h
    }

    pub fn head1_w(&self) -> Range<usize> {
        self.head1_w..self.head1_w + self.h * self.h
    }
    pub fn head1_b(&self) -> Range<usize> {
        self.head1_b..self.head1_b + self.h
    }
    pub fn head2_w(&self) -> Range<usize> {
        self.head2_w..self.head2_w + self.h
    }
    pub fn head2_b(&self) -> Range<usize> {
        self.head2_b..self.head2_b + 1
    }

    pub fn run_mean(&self, l: usize, kind: BnKind) -> Range<usize> {
        let base = l * 4 * self.h;
        let at = match kind {
            BnKind::Node => base,
            BnKind::Edge => base + 2 * self.h,
        };
        at..at + self.h
    }
    pub fn run_var(&self, l: usize, kind: BnKind) -> Range<usize> {
        let m = self.run_mean(l, kind);
        m.end..m.end + self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_tensors_tile_the_buffer() {
        let layout = Layout::new(8, 2);
        let model =
            ConvNetModel::new(ConvNetConfig::small(8, 2), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(model.params.len(), layout.total);
        assert_eq!(model.running.len(), layout.running_total);
        // spot-check adjacency of ranges
        assert_eq!(layout.node_embed_w().end, layout.node_embed_b().start);
        assert_eq!(layout.layer_w(0, 4).end, layout.bn_gamma(0, BnKind::Node).start);
        assert_eq!(layout.bn_beta(0, BnKind::Edge).end, layout.layer_w(1, 0).start);
        assert_eq!(layout.head2_b().end, layout.total);
    }

    #[test]
    fn fresh_model_has_unit_bn_scale() {
        let model =
            ConvNetModel::new(ConvNetConfig::small(8, 2), &mut ChaCha8Rng::seed_from_u64(1));
        let layout = model.layout();
        assert!(model.params[layout.bn_gamma(1, BnKind::Edge)].iter().all(|&g| g == 1.0));
        assert!(model.running[layout.run_var(0, BnKind::Node)].iter().all(|&v| v == 1.0));
        assert!(model.running[layout.run_mean(0, BnKind::Node)].iter().all(|&m| m == 0.0));
    }
}
