//! Forward and backward passes of the graph ConvNet.
//!
//! Node update:  x'_i = x_i + ReLU(BN(W1 x_i + sum_{j~i} eta_ij (.) W2 x_j))
//! with gates    eta_ij = sigmoid(e_ij) / (sum_{j'~i} sigmoid(e_ij') + eps),
//! edge update:  e'_ij = e_ij + ReLU(BN(W3 e_ij + W4 x_i + W5 x_j)),
//! head:         prob(edge) = sigmoid(MLP((e_ij + e_ji) / 2)).
//!
//! All gradients are written by hand against the flat parameter buffer and
//! validated by central finite differences.

use super::batch::GraphBatch;
use super::{BnKind, ConvNetModel, Layout};
use crate::error::{Error, Result};
use crate::gbt::sigmoid;

/// Per-batch-norm cached statistics and intermediates (training mode).
struct BnCache {
    mean: Vec<f64>,
    var: Vec<f64>,
    xhat: Vec<f64>,
    /// Post-affine output, before the ReLU.
    out: Vec<f64>,
}

struct LayerCache {
    sig: Vec<f64>,
    denom: Vec<f64>,
    eta: Vec<f64>,
    w2x: Vec<f64>,
    bn_u: BnCache,
    bn_v: BnCache,
}

pub(crate) struct Cache {
    /// Node embeddings per layer boundary: (layers+1) buffers of n*h.
    x: Vec<Vec<f64>>,
    /// Arc embeddings per layer boundary: (layers+1) buffers of arcs*h.
    e: Vec<Vec<f64>>,
    layers: Vec<LayerCache>,
    m: Vec<f64>,
    g_pre: Vec<f64>,
    g: Vec<f64>,
    pub probs: Vec<f64>,
}

fn matvec(w: &[f64], x: &[f64], out: &mut [f64], rows: usize, cols: usize) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        out[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// `dx += W^T dy`
fn matvec_t_acc(w: &[f64], dy: &[f64], dx: &mut [f64], rows: usize, cols: usize) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let d = dy[r];
        for (slot, a) in dx.iter_mut().zip(row) {
            *slot += a * d;
        }
    }
}

/// `dW += dy (x)^T`
fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64], rows: usize, cols: usize) {
    for r in 0..rows {
        let d = dy[r];
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (slot, b) in row.iter_mut().zip(x) {
            *slot += d * b;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn bn_forward(
    input: &[f64],
    rows: usize,
    h: usize,
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
    training: bool,
    run_mean: &[f64],
    run_var: &[f64],
) -> BnCache {
    let mut out = vec![0.0; input.len()];
    if !training {
        for r in 0..rows {
            for c in 0..h {
                let xhat = (input[r * h + c] - run_mean[c]) / (run_var[c] + eps).sqrt();
                out[r * h + c] = gamma[c] * xhat + beta[c];
            }
        }
        return BnCache { mean: run_mean.to_vec(), var: run_var.to_vec(), xhat: Vec::new(), out };
    }
    let mut mean = vec![0.0; h];
    let mut var = vec![0.0; h];
    for r in 0..rows {
        for c in 0..h {
            mean[c] += input[r * h + c];
        }
    }
    for m in &mut mean {
        *m /= rows as f64;
    }
    for r in 0..rows {
        for c in 0..h {
            let d = input[r * h + c] - mean[c];
            var[c] += d * d;
        }
    }
    for v in &mut var {
        *v /= rows as f64;
    }
    let mut xhat = vec![0.0; input.len()];
    for r in 0..rows {
        for c in 0..h {
            let xh = (input[r * h + c] - mean[c]) / (var[c] + eps).sqrt();
            xhat[r * h + c] = xh;
            out[r * h + c] = gamma[c] * xh + beta[c];
        }
    }
    BnCache { mean, var, xhat, out }
}

/// Returns d(input); accumulates dgamma/dbeta.
#[allow(clippy::too_many_arguments)]
fn bn_backward(
    dout: &[f64],
    cache: &BnCache,
    gamma: &[f64],
    rows: usize,
    h: usize,
    eps: f64,
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Vec<f64> {
    let mut sum_dxhat = vec![0.0; h];
    let mut sum_dxhat_xhat = vec![0.0; h];
    for r in 0..rows {
        for c in 0..h {
            let d = dout[r * h + c];
            let dxhat = d * gamma[c];
            sum_dxhat[c] += dxhat;
            sum_dxhat_xhat[c] += dxhat * cache.xhat[r * h + c];
            dgamma[c] += d * cache.xhat[r * h + c];
            dbeta[c] += d;
        }
    }
    let n = rows as f64;
    let mut dinput = vec![0.0; dout.len()];
    for r in 0..rows {
        for c in 0..h {
            let inv_std = 1.0 / (cache.var[c] + eps).sqrt();
            let dxhat = dout[r * h + c] * gamma[c];
            dinput[r * h + c] = inv_std
                * (dxhat - sum_dxhat[c] / n - cache.xhat[r * h + c] * sum_dxhat_xhat[c] / n);
        }
    }
    dinput
}

fn check_finite(values: &[f64], layer: usize, what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { layer, what: what.to_string() });
    }
    Ok(())
}

pub(crate) fn forward(
    model: &ConvNetModel,
    batch: &GraphBatch,
    training: bool,
) -> Result<Cache> {
    let lt = model.layout();
    let (h, h2) = (lt.h, lt.h2);
    let n = batch.n;
    let arcs = batch.arcs.len();
    let p = &model.params;
    let eta_eps = model.config.eta_eps;
    let bn_eps = model.config.bn_eps;

    // input embeddings
    let mut x0 = vec![0.0; n * h];
    {
        let w = &p[lt.node_embed_w()];
        let b = &p[lt.node_embed_b()];
        for i in 0..n {
            let f = &batch.node_feats[i];
            for r in 0..h {
                x0[i * h + r] =
                    b[r] + w[r * 3] * f[0] + w[r * 3 + 1] * f[1] + w[r * 3 + 2] * f[2];
            }
        }
    }
    let mut e0 = vec![0.0; arcs * h];
    {
        let dw = &p[lt.dist_embed_w()];
        let db = &p[lt.dist_embed_b()];
        for a in 0..arcs {
            let d = batch.arc_dist[a];
            for r in 0..h2 {
                e0[a * h + r] = dw[r] * d + db[r];
            }
            let ty = &p[lt.type_row(batch.arc_type[a])];
            for r in 0..h2 {
                e0[a * h + h2 + r] = ty[r];
            }
        }
    }

    let mut xs = vec![x0];
    let mut es = vec![e0];
    let mut layer_caches = Vec::with_capacity(lt.layers);

    for l in 0..lt.layers {
        let x = xs.last().unwrap();
        let e = es.last().unwrap();

        let mut sig = vec![0.0; arcs * h];
        for (s, &v) in sig.iter_mut().zip(e.iter()) {
            *s = sigmoid(v);
        }
        let mut denom = vec![eta_eps; n * h];
        for (a, &(i, _)) in batch.arcs.iter().enumerate() {
            for c in 0..h {
                denom[i * h + c] += sig[a * h + c];
            }
        }
        let mut eta = vec![0.0; arcs * h];
        for (a, &(i, _)) in batch.arcs.iter().enumerate() {
            for c in 0..h {
                eta[a * h + c] = sig[a * h + c] / denom[i * h + c];
            }
        }

        let w1 = &p[lt.layer_w(l, 0)];
        let w2 = &p[lt.layer_w(l, 1)];
        let w3 = &p[lt.layer_w(l, 2)];
        let w4 = &p[lt.layer_w(l, 3)];
        let w5 = &p[lt.layer_w(l, 4)];

        let mut w2x = vec![0.0; n * h];
        let mut w4x = vec![0.0; n * h];
        let mut w5x = vec![0.0; n * h];
        for i in 0..n {
            let xi = &x[i * h..(i + 1) * h];
            matvec(w2, xi, &mut w2x[i * h..(i + 1) * h], h, h);
            matvec(w4, xi, &mut w4x[i * h..(i + 1) * h], h, h);
            matvec(w5, xi, &mut w5x[i * h..(i + 1) * h], h, h);
        }

        // node pre-activation u
        let mut u = vec![0.0; n * h];
        for i in 0..n {
            matvec(w1, &x[i * h..(i + 1) * h], &mut u[i * h..(i + 1) * h], h, h);
        }
        for (a, &(i, j)) in batch.arcs.iter().enumerate() {
            for c in 0..h {
                u[i * h + c] += eta[a * h + c] * w2x[j * h + c];
            }
        }
        let bn_u = bn_forward(
            &u,
            n,
            h,
            &p[lt.bn_gamma(l, BnKind::Node)],
            &p[lt.bn_beta(l, BnKind::Node)],
            bn_eps,
            training,
            &model.running[lt.run_mean(l, BnKind::Node)],
            &model.running[lt.run_var(l, BnKind::Node)],
        );
        check_finite(&bn_u.out, l, "node embedding")?;
        let mut x_next = x.clone();
        for (slot, &o) in x_next.iter_mut().zip(bn_u.out.iter()) {
            *slot += o.max(0.0);
        }

        // edge pre-activation v
        let mut v = vec![0.0; arcs * h];
        for (a, &(i, j)) in batch.arcs.iter().enumerate() {
            matvec(w3, &e[a * h..(a + 1) * h], &mut v[a * h..(a + 1) * h], h, h);
            for c in 0..h {
                v[a * h + c] += w4x[i * h + c] + w5x[j * h + c];
            }
        }
        let bn_v = bn_forward(
            &v,
            arcs,
            h,
            &p[lt.bn_gamma(l, BnKind::Edge)],
            &p[lt.bn_beta(l, BnKind::Edge)],
            bn_eps,
            training,
            &model.running[lt.run_mean(l, BnKind::Edge)],
            &model.running[lt.run_var(l, BnKind::Edge)],
        );
        check_finite(&bn_v.out, l, "edge embedding")?;
        let mut e_next = e.clone();
        for (slot, &o) in e_next.iter_mut().zip(bn_v.out.iter()) {
            *slot += o.max(0.0);
        }

        xs.push(x_next);
        es.push(e_next);
        layer_caches.push(LayerCache { sig, denom, eta, w2x, bn_u, bn_v });
    }

    // classifier head on symmetrized final arc embeddings
    let e_last = es.last().unwrap();
    let k_edges = batch.edges.len();
    let mut m = vec![0.0; k_edges * h];
    for (k, &(ij, ji)) in batch.edge_arcs.iter().enumerate() {
        for c in 0..h {
            m[k * h + c] = 0.5 * (e_last[ij * h + c] + e_last[ji * h + c]);
        }
    }
    let h1w = &p[lt.head1_w()];
    let h1b = &p[lt.head1_b()];
    let h2w = &p[lt.head2_w()];
    let h2b = p[lt.head2_b()][0];
    let mut g_pre = vec![0.0; k_edges * h];
    let mut g = vec![0.0; k_edges * h];
    let mut probs = vec![0.0; k_edges];
    for k in 0..k_edges {
        matvec(h1w, &m[k * h..(k + 1) * h], &mut g_pre[k * h..(k + 1) * h], h, h);
        for c in 0..h {
            g_pre[k * h + c] += h1b[c];
            g[k * h + c] = g_pre[k * h + c].max(0.0);
        }
        let logit: f64 =
            h2b + h2w.iter().zip(&g[k * h..(k + 1) * h]).map(|(a, b)| a * b).sum::<f64>();
        probs[k] = sigmoid(logit);
    }
    check_finite(&probs, lt.layers, "classifier output")?;

    Ok(Cache { x: xs, e: es, layers: layer_caches, m, g_pre, g, probs })
}

/// Per-edge probabilities in inference mode (running batch-norm statistics;
/// deterministic and bit-stable across repeated calls).
pub fn convnet_forward(model: &ConvNetModel, batch: &GraphBatch) -> Result<Vec<f64>> {
    Ok(forward(model, batch, false)?.probs)
}

/// Mean binary cross-entropy in training mode (batch statistics), without
/// touching the model. Used as the reference for gradient checking.
pub fn convnet_loss(model: &ConvNetModel, batch: &GraphBatch, targets: &[u8]) -> Result<f64> {
    if targets.len() != batch.edges.len() {
        return Err(Error::Dimension(format!(
            "{} targets for {} edges",
            targets.len(),
            batch.edges.len()
        )));
    }
    let cache = forward(model, batch, true)?;
    Ok(bce_mean(&cache.probs, targets))
}

fn bce_mean(probs: &[f64], targets: &[u8]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let mut loss = 0.0;
    for (&p, &y) in probs.iter().zip(targets) {
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        loss -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    loss / probs.len() as f64
}

/// Training-mode forward and exact backward pass. Returns the loss and the
/// gradient buffer (same length as `model.params`) and folds the batch
/// statistics into the running estimates.
pub fn convnet_backward(
    model: &mut ConvNetModel,
    batch: &GraphBatch,
    targets: &[u8],
) -> Result<(f64, Vec<f64>)> {
    if targets.len() != batch.edges.len() {
        return Err(Error::Dimension(format!(
            "{} targets for {} edges",
            targets.len(),
            batch.edges.len()
        )));
    }
    let cache = forward(model, batch, true)?;
    let loss = bce_mean(&cache.probs, targets);

    let lt = model.layout();
    let (h, h2) = (lt.h, lt.h2);
    let n = batch.n;
    let arcs = batch.arcs.len();
    let k_edges = batch.edges.len();
    let p = &model.params;
    let mut grads = vec![0.0; p.len()];

    // head backward
    let mut de_next = vec![0.0; arcs * h];
    if k_edges > 0 {
        let h1w = &p[lt.head1_w()];
        let h2w = &p[lt.head2_w()];
        let scale = 1.0 / k_edges as f64;
        let mut dm = vec![0.0; h];
        let mut dg_pre = vec![0.0; h];
        for k in 0..k_edges {
            let dlogit = (cache.probs[k] - targets[k] as f64) * scale;
            // output unit
            {
                let gk = &cache.g[k * h..(k + 1) * h];
                let (dh2w, rest) = grads[lt.head2_w().start..lt.head2_b().end]
                    .split_at_mut(h);
                for (slot, &gv) in dh2w.iter_mut().zip(gk) {
                    *slot += dlogit * gv;
                }
                rest[0] += dlogit;
            }
            // hidden head layer
            for c in 0..h {
                let dg = h2w[c] * dlogit;
                dg_pre[c] = if cache.g_pre[k * h + c] > 0.0 { dg } else { 0.0 };
            }
            outer_acc(&mut grads[lt.head1_w()], &dg_pre, &cache.m[k * h..(k + 1) * h], h, h);
            for (slot, &d) in grads[lt.head1_b()].iter_mut().zip(&dg_pre) {
                *slot += d;
            }
            dm.iter_mut().for_each(|d| *d = 0.0);
            matvec_t_acc(h1w, &dg_pre, &mut dm, h, h);
            // symmetrized arc embeddings
            let (ij, ji) = batch.edge_arcs[k];
            for c in 0..h {
                de_next[ij * h + c] += 0.5 * dm[c];
                de_next[ji * h + c] += 0.5 * dm[c];
            }
        }
    }
    let mut dx_next = vec![0.0; n * h];

    for l in (0..lt.layers).rev() {
        let lc = &cache.layers[l];
        let x_l = &cache.x[l];
        let e_l = &cache.e[l];
        let w1 = &p[lt.layer_w(l, 0)];
        let w2 = &p[lt.layer_w(l, 1)];
        let w3 = &p[lt.layer_w(l, 2)];
        let w4 = &p[lt.layer_w(l, 3)];
        let w5 = &p[lt.layer_w(l, 4)];

        // residual passthrough
        let mut dx_cur = dx_next.clone();
        let mut de_cur = de_next.clone();

        // edge side: e' = e + ReLU(BN(v))
        let mut dbn_out_v = vec![0.0; arcs * h];
        for idx in 0..arcs * h {
            if lc.bn_v.out[idx] > 0.0 {
                dbn_out_v[idx] = de_next[idx];
            }
        }
        let dv = {
            let (dgamma, dbeta) = {
                let g_range = lt.bn_gamma(l, BnKind::Edge);
                let b_range = lt.bn_beta(l, BnKind::Edge);
                let (left, right) = grads.split_at_mut(b_range.start);
                (&mut left[g_range], &mut right[..h])
            };
            bn_backward(
                &dbn_out_v,
                &lc.bn_v,
                &p[lt.bn_gamma(l, BnKind::Edge)],
                arcs,
                h,
                model.config.bn_eps,
                dgamma,
                dbeta,
            )
        };
        // v = W3 e + W4 x_i + W5 x_j
        let mut dw4x = vec![0.0; n * h];
        let mut dw5x = vec![0.0; n * h];
        for (a, &(i, j)) in batch.arcs.iter().enumerate() {
            let dva = &dv[a * h..(a + 1) * h];
            outer_acc(&mut grads[lt.layer_w(l, 2)], dva, &e_l[a * h..(a + 1) * h], h, h);
            matvec_t_acc(w3, dva, &mut de_cur[a * h..(a + 1) * h], h, h);
            for c in 0..h {
                dw4x[i * h + c] += dva[c];
                dw5x[j * h + c] += dva[c];
            }
        }
        for i in 0..n {
            let xi = &x_l[i * h..(i + 1) * h];
            outer_acc(&mut grads[lt.layer_w(l, 3)], &dw4x[i * h..(i + 1) * h], xi, h, h);
            matvec_t_acc(w4, &dw4x[i * h..(i + 1) * h], &mut dx_cur[i * h..(i + 1) * h], h, h);
            outer_acc(&mut grads[lt.layer_w(l, 4)], &dw5x[i * h..(i + 1) * h], xi, h, h);
            matvec_t_acc(w5, &dw5x[i * h..(i + 1) * h], &mut dx_cur[i * h..(i + 1) * h], h, h);
        }

        // node side: x' = x + ReLU(BN(u))
        let mut dbn_out_u = vec![0.0; n * h];
        for idx in 0..n * h {
            if lc.bn_u.out[idx] > 0.0 {
                dbn_out_u[idx] = dx_next[idx];
            }
        }
        let du = {
            let (dgamma, dbeta) = {
                let g_range = lt.bn_gamma(l, BnKind::Node);
                let b_range = lt.bn_beta(l, BnKind::Node);
                let (left, right) = grads.split_at_mut(b_range.start);
                (&mut left[g_range], &mut right[..h])
            };
            bn_backward(
                &dbn_out_u,
                &lc.bn_u,
                &p[lt.bn_gamma(l, BnKind::Node)],
                n,
                h,
                model.config.bn_eps,
                dgamma,
                dbeta,
            )
        };
        // u_i = W1 x_i + sum_a eta (.) W2 x_j
        let mut deta = vec![0.0; arcs * h];
        let mut dw2x = vec![0.0; n * h];
        for i in 0..n {
            let dui = &du[i * h..(i + 1) * h];
            outer_acc(&mut grads[lt.layer_w(l, 0)], dui, &x_l[i * h..(i + 1) * h], h, h);
            matvec_t_acc(w1, dui, &mut dx_cur[i * h..(i + 1) * h], h, h);
        }
        for (a, &(i, j)) in batch.arcs.iter().enumerate() {
            for c in 0..h {
                let dui = du[i * h + c];
                deta[a * h + c] = dui * lc.w2x[j * h + c];
                dw2x[j * h + c] += lc.eta[a * h + c] * dui;
            }
        }
        for j in 0..n {
            let xj = &x_l[j * h..(j + 1) * h];
            outer_acc(&mut grads[lt.layer_w(l, 1)], &dw2x[j * h..(j + 1) * h], xj, h, h);
            matvec_t_acc(w2, &dw2x[j * h..(j + 1) * h], &mut dx_cur[j * h..(j + 1) * h], h, h);
        }
        // gates: eta = sig / denom, denom = eps + sum of sig over arcs from i
        let mut ddenom = vec![0.0; n * h];
        for (a, &(i, _)) in batch.arcs.iter().enumerate() {
            for c in 0..h {
                ddenom[i * h + c] -=
                    deta[a * h + c] * lc.eta[a * h + c] / lc.denom[i * h + c];
            }
        }
        for (a, &(i, _)) in batch.arcs.iter().enumerate() {
            for c in 0..h {
                let dsig = deta[a * h + c] / lc.denom[i * h + c] + ddenom[i * h + c];
                let s = lc.sig[a * h + c];
                de_cur[a * h + c] += dsig * s * (1.0 - s);
            }
        }

        dx_next = dx_cur;
        de_next = de_cur;
    }

    // input embeddings
    {
        let w_range = lt.node_embed_w();
        for i in 0..n {
            let f = &batch.node_feats[i];
            for r in 0..h {
                let d = dx_next[i * h + r];
                grads[w_range.start + r * 3] += d * f[0];
                grads[w_range.start + r * 3 + 1] += d * f[1];
                grads[w_range.start + r * 3 + 2] += d * f[2];
            }
            for (slot, &d) in
                grads[lt.node_embed_b()].iter_mut().zip(&dx_next[i * h..(i + 1) * h])
            {
                *slot += d;
            }
        }
        for a in 0..arcs {
            let d_feat = batch.arc_dist[a];
            for r in 0..h2 {
                let d = de_next[a * h + r];
                grads[lt.dist_embed_w().start + r] += d * d_feat;
                grads[lt.dist_embed_b().start + r] += d;
            }
            let ty = lt.type_row(batch.arc_type[a]);
            for r in 0..h2 {
                grads[ty.start + r] += de_next[a * h + h2 + r];
            }
        }
    }

    // fold batch statistics into the running estimates
    let mom = model.config.bn_momentum;
    for l in 0..lt.layers {
        let lc = &cache.layers[l];
        for (kind, bn) in [(BnKind::Node, &lc.bn_u), (BnKind::Edge, &lc.bn_v)] {
            let mean_range = lt.run_mean(l, kind);
            let var_range = lt.run_var(l, kind);
            for (c, slot) in model.running[mean_range].iter_mut().enumerate() {
                *slot = (1.0 - mom) * *slot + mom * bn.mean[c];
            }
            for (c, slot) in model.running[var_range].iter_mut().enumerate() {
                *slot = (1.0 - mom) * *slot + mom * bn.var[c];
            }
        }
    }

    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_instance, CustomerDistribution, DemandProfile, DepotPosition};
    use crate::gnn::batch::{build_graph, GraphMode};
    use crate::gnn::ConvNetConfig;
    use crate::instance::{DistanceMode, DistanceOracle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_batch(seed: u64, n: usize, mode: GraphMode) -> GraphBatch {
        let inst = generate_instance(
            seed,
            n,
            DepotPosition::Central,
            CustomerDistribution::Random,
            DemandProfile::SmallSpread,
        );
        let oracle = DistanceOracle::new(&inst, DistanceMode::RoundedEuclidean, 25);
        build_graph(&inst, &oracle, mode, None, None).unwrap()
    }

    #[test]
    fn zeroed_head_outputs_half_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = ConvNetModel::new(ConvNetConfig::small(8, 2), &mut rng);
        let lt = model.layout();
        for w in &mut model.params[lt.head2_w()] {
            *w = 0.0;
        }
        model.params[lt.head2_b()][0] = 0.0;
        let batch = small_batch(1, 11, GraphMode::Full);
        let probs = convnet_forward(&model, &batch).unwrap();
        assert!(probs.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn outputs_are_strict_probabilities_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = ConvNetModel::new(ConvNetConfig::small(8, 3), &mut rng);
        let batch = small_batch(3, 15, GraphMode::Knn(6));
        let a = convnet_forward(&model, &batch).unwrap();
        let b = convnet_forward(&model, &batch).unwrap();
        assert_eq!(a, b, "inference must be bit-stable");
        assert!(a.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn single_arc_gate_normalizes_to_one_term() {
        // two nodes, one undirected edge: each node sees exactly one arc, so
        // eta = sig / (sig + eps) elementwise
        let inst = generate_instance(
            4,
            1,
            DepotPosition::Central,
            CustomerDistribution::Random,
            DemandProfile::Unit,
        );
        let oracle = DistanceOracle::new(&inst, DistanceMode::RoundedEuclidean, 5);
        let batch = build_graph(&inst, &oracle, GraphMode::Full, None, None).unwrap();
        assert_eq!(batch.arcs.len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = ConvNetModel::new(ConvNetConfig::small(6, 1), &mut rng);
        let cache = forward(&model, &batch, true).unwrap();
        let lc = &cache.layers[0];
        let h = 6;
        for a in 0..2 {
            for c in 0..h {
                let s = lc.sig[a * h + c];
                let expected = s / (s + model.config.eta_eps);
                assert!((lc.eta[a * h + c] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_parameters_are_reported_with_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut model = ConvNetModel::new(ConvNetConfig::small(8, 2), &mut rng);
        let lt = model.layout();
        let w1_l1 = lt.layer_w(1, 0);
        model.params[w1_l1][0] = f64::NAN;
        let batch = small_batch(6, 10, GraphMode::Full);
        match convnet_forward(&model, &batch) {
            Err(Error::NonFinite { layer, .. }) => assert_eq!(layer, 1),
            other => panic!("expected a non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        // the pinned configuration: width 8, 2 layers, 12-node graph
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut model = ConvNetModel::new(ConvNetConfig::small(8, 2), &mut rng);
        let batch = small_batch(7, 11, GraphMode::Knn(5));
        let targets: Vec<u8> = (0..batch.edges.len()).map(|_| rng.gen_range(0..2)).collect();

        let (_, grads) = convnet_backward(&mut model.clone(), &batch, &targets).unwrap();

        let eps = 1e-5;
        let mut worst = 0.0f64;
        for k in 0..model.params.len() {
            let saved = model.params[k];
            model.params[k] = saved + eps;
            let plus = convnet_loss(&model, &batch, &targets).unwrap();
            model.params[k] = saved - eps;
            let minus = convnet_loss(&model, &batch, &targets).unwrap();
            model.params[k] = saved;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads[k];
            let denom = numeric.abs().max(analytic.abs());
            let err = if denom > 1e-7 {
                (numeric - analytic).abs() / denom
            } else {
                (numeric - analytic).abs()
            };
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "max relative gradient error {worst}");
    }

    #[test]
    fn permutation_equivariance_of_edge_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = ConvNetModel::new(ConvNetConfig::small(8, 3), &mut rng);
        let batch = small_batch(8, 14, GraphMode::Knn(6));
        let probs = convnet_forward(&model, &batch).unwrap();

        // relabel batch nodes by a random permutation
        let mut perm: Vec<usize> = (0..batch.n).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let mut permuted = batch.clone();
        permuted.node_feats = vec![[0.0; 3]; batch.n];
        for i in 0..batch.n {
            permuted.node_feats[perm[i]] = batch.node_feats[i];
        }
        permuted.arcs = batch.arcs.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        permuted.arcs_from = vec![Vec::new(); batch.n];
        for (a, &(i, _)) in permuted.arcs.iter().enumerate() {
            permuted.arcs_from[i].push(a);
        }
        let probs_perm = convnet_forward(&model, &permuted).unwrap();
        for (k, (&a, &b)) in probs.iter().zip(&probs_perm).enumerate() {
            assert!((a - b).abs() < 1e-6, "edge {k}: {a} vs {b}");
        }
    }
}
