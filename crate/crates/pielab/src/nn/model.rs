//! Forward and reverse passes for the two classifier families.
//!
//! Parameters are f32; every intermediate value here is f64. The mean batch
//! loss computed by [`training_loss`] is the exact function differentiated by
//! [`backward`], which keeps analytic gradients within finite-difference
//! tolerance.

// Index loops mirror the matrix shapes; iterator adapters obscure the
// accumulation patterns here.
#![allow(clippy::needless_range_loop)]

use crate::corpus::{EncodedExample, LabelKind};
use crate::nn::{Gradients, ModelFamily, NnError, ParamSet, Tensor};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&x| (x - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Loss of a single example from its logit vector.
pub(crate) fn example_loss(z: &[f64], y: &[f64], kind: LabelKind) -> f64 {
    match kind {
        LabelKind::Single => {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
            lse - z.iter().zip(y).map(|(&zi, &yi)| zi * yi).sum::<f64>()
        }
        LabelKind::Multi => {
            let c = z.len() as f64;
            z.iter()
                .zip(y)
                .map(|(&zi, &yi)| softplus(zi) - yi * zi)
                .sum::<f64>()
                / c
        }
    }
}

/// dLoss/dlogits of a single example (unscaled by batch size).
fn example_dloss(z: &[f64], y: &[f64], kind: LabelKind) -> Vec<f64> {
    match kind {
        LabelKind::Single => {
            let p = softmax(z);
            p.iter().zip(y).map(|(&pi, &yi)| pi - yi).collect()
        }
        LabelKind::Multi => {
            let c = z.len() as f64;
            z.iter()
                .zip(y)
                .map(|(&zi, &yi)| (sigmoid(zi) - yi) / c)
                .collect()
        }
    }
}

fn check_ids(params: &ParamSet, batch: &[EncodedExample]) -> Result<(), NnError> {
    let v = params.spec.vocab_size;
    for ex in batch {
        for &id in &ex.token_ids {
            if id as usize >= v {
                return Err(NnError::TokenOutOfRange { id, vocab_size: v });
            }
        }
    }
    Ok(())
}

/// Per-example activations of the MLP family.
struct MlpTrace {
    mean_emb: Vec<f64>,
    h_pre: Vec<f64>,
    h: Vec<f64>,
    logits: Vec<f64>,
}

fn mlp_forward_example(params: &ParamSet, ex: &EncodedExample) -> MlpTrace {
    let spec = &params.spec;
    let (e, h_dim, c) = (spec.embedding_dim, spec.hidden_dim, spec.num_classes);
    let emb = &params.layer("embedding").unwrap().tensor;
    let w_h = &params.layer("hidden.weight").unwrap().tensor;
    let b_h = &params.layer("hidden.bias").unwrap().tensor;
    let w_c = &params.layer("classifier.weight").unwrap().tensor;
    let b_c = &params.layer("classifier.bias").unwrap().tensor;

    // Mean over non-pad embeddings; an all-pad row means the zero vector.
    let mut mean_emb = vec![0.0f64; e];
    let t = ex.true_length;
    if t > 0 {
        for &id in &ex.token_ids[..t] {
            let row = emb.row(id as usize);
            for (m, &x) in mean_emb.iter_mut().zip(row) {
                *m += f64::from(x);
            }
        }
        for m in mean_emb.iter_mut() {
            *m /= t as f64;
        }
    }

    let mut h_pre = vec![0.0f64; h_dim];
    for j in 0..h_dim {
        let mut acc = f64::from(b_h.data()[j]);
        for i in 0..e {
            acc += mean_emb[i] * f64::from(w_h.at2(i, j));
        }
        h_pre[j] = acc;
    }
    let h: Vec<f64> = h_pre.iter().map(|&x| x.max(0.0)).collect();

    let mut logits = vec![0.0f64; c];
    for k in 0..c {
        let mut acc = f64::from(b_c.data()[k]);
        for j in 0..h_dim {
            acc += h[j] * f64::from(w_c.at2(j, k));
        }
        logits[k] = acc;
    }
    MlpTrace {
        mean_emb,
        h_pre,
        h,
        logits,
    }
}

/// Per-step cell state saved for backpropagation through time.
struct LstmStep {
    position: usize,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
}

struct LstmTrace {
    steps: Vec<LstmStep>,
    final_h: Vec<f64>,
}

/// Run one LSTM direction over the given positions (already ordered).
fn lstm_direction(
    params: &ParamSet,
    ex: &EncodedExample,
    prefix: &str,
    positions: &[usize],
) -> LstmTrace {
    let spec = &params.spec;
    let (e, h_dim) = (spec.embedding_dim, spec.hidden_dim);
    let emb = &params.layer("embedding").unwrap().tensor;
    let w_x = &params.layer(&format!("{prefix}.w_input")).unwrap().tensor;
    let w_h = &params.layer(&format!("{prefix}.w_hidden")).unwrap().tensor;
    let bias = &params.layer(&format!("{prefix}.bias")).unwrap().tensor;

    let mut h = vec![0.0f64; h_dim];
    let mut c = vec![0.0f64; h_dim];
    let mut steps = Vec::with_capacity(positions.len());
    for &pos in positions {
        let x = emb.row(ex.token_ids[pos] as usize);
        let mut a = vec![0.0f64; 4 * h_dim];
        for (q, av) in a.iter_mut().enumerate() {
            *av = f64::from(bias.data()[q]);
        }
        for i in 0..e {
            let xi = f64::from(x[i]);
            let row = w_x.row(i);
            for q in 0..4 * h_dim {
                a[q] += xi * f64::from(row[q]);
            }
        }
        for j in 0..h_dim {
            let hj = h[j];
            let row = w_h.row(j);
            for q in 0..4 * h_dim {
                a[q] += hj * f64::from(row[q]);
            }
        }
        let mut step = LstmStep {
            position: pos,
            i: vec![0.0; h_dim],
            f: vec![0.0; h_dim],
            g: vec![0.0; h_dim],
            o: vec![0.0; h_dim],
            c: vec![0.0; h_dim],
            tanh_c: vec![0.0; h_dim],
            h_prev: h.clone(),
            c_prev: c.clone(),
        };
        for j in 0..h_dim {
            step.i[j] = sigmoid(a[j]);
            step.f[j] = sigmoid(a[h_dim + j]);
            step.g[j] = a[2 * h_dim + j].tanh();
            step.o[j] = sigmoid(a[3 * h_dim + j]);
            step.c[j] = step.f[j] * step.c_prev[j] + step.i[j] * step.g[j];
            step.tanh_c[j] = step.c[j].tanh();
            c[j] = step.c[j];
            h[j] = step.o[j] * step.tanh_c[j];
        }
        steps.push(step);
    }
    LstmTrace { steps, final_h: h }
}

struct BilstmTrace {
    fwd: LstmTrace,
    bwd: LstmTrace,
    concat: Vec<f64>,
    logits: Vec<f64>,
}

fn bilstm_forward_example(params: &ParamSet, ex: &EncodedExample) -> BilstmTrace {
    let spec = &params.spec;
    let (h_dim, c_dim) = (spec.hidden_dim, spec.num_classes);
    let w_c = &params.layer("classifier.weight").unwrap().tensor;
    let b_c = &params.layer("classifier.bias").unwrap().tensor;

    let t = ex.true_length;
    let forward_positions: Vec<usize> = (0..t).collect();
    let backward_positions: Vec<usize> = (0..t).rev().collect();
    let fwd = lstm_direction(params, ex, "lstm_fwd", &forward_positions);
    let bwd = lstm_direction(params, ex, "lstm_bwd", &backward_positions);

    let mut concat = Vec::with_capacity(2 * h_dim);
    concat.extend_from_slice(&fwd.final_h);
    concat.extend_from_slice(&bwd.final_h);

    let mut logits = vec![0.0f64; c_dim];
    for k in 0..c_dim {
        let mut acc = f64::from(b_c.data()[k]);
        for (j, &cj) in concat.iter().enumerate() {
            acc += cj * f64::from(w_c.at2(j, k));
        }
        logits[k] = acc;
    }
    BilstmTrace {
        fwd,
        bwd,
        concat,
        logits,
    }
}

fn example_logits(params: &ParamSet, ex: &EncodedExample) -> Vec<f64> {
    match params.spec.family {
        ModelFamily::MeanEmbeddingMlp => mlp_forward_example(params, ex).logits,
        ModelFamily::Bilstm => bilstm_forward_example(params, ex).logits,
    }
}

pub(crate) fn forward_logits(
    params: &ParamSet,
    batch: &[EncodedExample],
) -> Result<Tensor, NnError> {
    check_ids(params, batch)?;
    let c = params.spec.num_classes;
    let mut out = Vec::with_capacity(batch.len() * c);
    for ex in batch {
        out.extend(example_logits(params, ex).into_iter().map(|x| x as f32));
    }
    Ok(Tensor::from_vec(vec![batch.len(), c], out))
}

pub(crate) fn training_loss(params: &ParamSet, batch: &[EncodedExample]) -> Result<f64, NnError> {
    check_ids(params, batch)?;
    let kind = params.spec.kind;
    let mut total = 0.0f64;
    for ex in batch {
        let z = example_logits(params, ex);
        let y: Vec<f64> = ex.label_vector.iter().map(|&v| f64::from(v)).collect();
        total += example_loss(&z, &y, kind);
    }
    Ok(total / batch.len().max(1) as f64)
}

/// Backpropagate one LSTM direction from the gradient at its final hidden
/// state, accumulating into the shared gradient arrays. The batch scale is
/// already folded into `dh_final`.
fn lstm_backward(
    params: &ParamSet,
    ex: &EncodedExample,
    prefix: &str,
    trace: &LstmTrace,
    dh_final: &[f64],
    grads: &mut Gradients,
    emb_idx: usize,
) {
    let spec = &params.spec;
    let (e, h_dim) = (spec.embedding_dim, spec.hidden_dim);
    let emb = &params.layer("embedding").unwrap().tensor;
    let w_x = &params.layer(&format!("{prefix}.w_input")).unwrap().tensor;
    let w_h = &params.layer(&format!("{prefix}.w_hidden")).unwrap().tensor;
    let wx_idx = params.layer_index(&format!("{prefix}.w_input")).unwrap();
    let wh_idx = params.layer_index(&format!("{prefix}.w_hidden")).unwrap();
    let b_idx = params.layer_index(&format!("{prefix}.bias")).unwrap();

    let mut dh = dh_final.to_vec();
    let mut dc = vec![0.0f64; h_dim];
    for step in trace.steps.iter().rev() {
        let mut da = vec![0.0f64; 4 * h_dim];
        for j in 0..h_dim {
            let do_j = dh[j] * step.tanh_c[j];
            let dtanh = dh[j] * step.o[j];
            let dcj = dc[j] + dtanh * (1.0 - step.tanh_c[j] * step.tanh_c[j]);
            let di = dcj * step.g[j];
            let df = dcj * step.c_prev[j];
            let dg = dcj * step.i[j];
            dc[j] = dcj * step.f[j];
            da[j] = di * step.i[j] * (1.0 - step.i[j]);
            da[h_dim + j] = df * step.f[j] * (1.0 - step.f[j]);
            da[2 * h_dim + j] = dg * (1.0 - step.g[j] * step.g[j]);
            da[3 * h_dim + j] = do_j * step.o[j] * (1.0 - step.o[j]);
        }
        // Bias gradient.
        for q in 0..4 * h_dim {
            grads.layers[b_idx][q] += da[q];
        }
        // Input weight gradient and gradient into the embedding row.
        let token = ex.token_ids[step.position] as usize;
        let x = emb.row(token);
        for i in 0..e {
            let xi = f64::from(x[i]);
            let mut dx_i = 0.0f64;
            let w_row = w_x.row(i);
            for q in 0..4 * h_dim {
                grads.layers[wx_idx][i * 4 * h_dim + q] += xi * da[q];
                dx_i += f64::from(w_row[q]) * da[q];
            }
            grads.layers[emb_idx][token * e + i] += dx_i;
        }
        // Hidden weight gradient and gradient to the previous hidden state.
        let mut dh_prev = vec![0.0f64; h_dim];
        for j in 0..h_dim {
            let hj = step.h_prev[j];
            let w_row = w_h.row(j);
            let mut acc = 0.0f64;
            for q in 0..4 * h_dim {
                grads.layers[wh_idx][j * 4 * h_dim + q] += hj * da[q];
                acc += f64::from(w_row[q]) * da[q];
            }
            dh_prev[j] = acc;
        }
        dh = dh_prev;
    }
}

pub(crate) fn backward(params: &ParamSet, batch: &[EncodedExample]) -> Result<Gradients, NnError> {
    check_ids(params, batch)?;
    let spec = &params.spec;
    let kind = spec.kind;
    let (e, h_dim, c_dim) = (spec.embedding_dim, spec.hidden_dim, spec.num_classes);
    let mut grads = Gradients::zeros_like(params);
    let scale = 1.0 / batch.len().max(1) as f64;

    let emb_idx = params.layer_index("embedding").unwrap();
    let wc_idx = params.layer_index("classifier.weight").unwrap();
    let bc_idx = params.layer_index("classifier.bias").unwrap();
    let w_c = &params.layer("classifier.weight").unwrap().tensor;

    match spec.family {
        ModelFamily::MeanEmbeddingMlp => {
            let wh_idx = params.layer_index("hidden.weight").unwrap();
            let bh_idx = params.layer_index("hidden.bias").unwrap();
            let w_h = &params.layer("hidden.weight").unwrap().tensor;
            for ex in batch {
                let trace = mlp_forward_example(params, ex);
                let y: Vec<f64> = ex.label_vector.iter().map(|&v| f64::from(v)).collect();
                let mut dz = example_dloss(&trace.logits, &y, kind);
                dz.iter_mut().for_each(|d| *d *= scale);

                let mut dh = vec![0.0f64; h_dim];
                for k in 0..c_dim {
                    grads.layers[bc_idx][k] += dz[k];
                    for j in 0..h_dim {
                        grads.layers[wc_idx][j * c_dim + k] += trace.h[j] * dz[k];
                        dh[j] += f64::from(w_c.at2(j, k)) * dz[k];
                    }
                }
                let dh_pre: Vec<f64> = dh
                    .iter()
                    .zip(&trace.h_pre)
                    .map(|(&d, &pre)| if pre > 0.0 { d } else { 0.0 })
                    .collect();
                let mut dmean = vec![0.0f64; e];
                for j in 0..h_dim {
                    grads.layers[bh_idx][j] += dh_pre[j];
                    for i in 0..e {
                        grads.layers[wh_idx][i * h_dim + j] += trace.mean_emb[i] * dh_pre[j];
                        dmean[i] += f64::from(w_h.at2(i, j)) * dh_pre[j];
                    }
                }
                let t = ex.true_length;
                if t > 0 {
                    let inv_t = 1.0 / t as f64;
                    for &id in &ex.token_ids[..t] {
                        let row = id as usize * e;
                        for i in 0..e {
                            grads.layers[emb_idx][row + i] += dmean[i] * inv_t;
                        }
                    }
                }
            }
        }
        ModelFamily::Bilstm => {
            for ex in batch {
                let trace = bilstm_forward_example(params, ex);
                let y: Vec<f64> = ex.label_vector.iter().map(|&v| f64::from(v)).collect();
                let mut dz = example_dloss(&trace.logits, &y, kind);
                dz.iter_mut().for_each(|d| *d *= scale);

                let mut dconcat = vec![0.0f64; 2 * h_dim];
                for k in 0..c_dim {
                    grads.layers[bc_idx][k] += dz[k];
                    for (j, &cj) in trace.concat.iter().enumerate() {
                        grads.layers[wc_idx][j * c_dim + k] += cj * dz[k];
                        dconcat[j] += f64::from(w_c.at2(j, k)) * dz[k];
                    }
                }
                lstm_backward(
                    params,
                    ex,
                    "lstm_fwd",
                    &trace.fwd,
                    &dconcat[..h_dim],
                    &mut grads,
                    emb_idx,
                );
                lstm_backward(
                    params,
                    ex,
                    "lstm_bwd",
                    &trace.bwd,
                    &dconcat[h_dim..],
                    &mut grads,
                    emb_idx,
                );
            }
        }
    }
    Ok(grads)
}
