//! Forward and reverse passes of the full classifier:
//! 4 × (dilated conv → batch norm → ReLU → dropout) → adaptive average pool
//! → flatten → dropout → linear.

use super::activation::{
    dropout, dropout_backward, dropout_batch, dropout_batch_backward, relu, relu_backward,
    DropoutKey, DropoutMask,
};
use super::batchnorm::{batchnorm_backward, batchnorm_forward, update_running_stats, BnCache};
use super::config::{ModelConfig, LAYERS};
use super::conv::{conv1d_backward, conv1d_forward, ConvCache, ConvShape};
use super::linear::{linear_backward, linear_forward};
use super::loss::softmax_cross_entropy;
use super::params::{ModelGrads, ModelParams, Slot};
use super::pool::{adaptive_avgpool, adaptive_avgpool_backward, PoolCache};
use super::Mode;
use crate::corpus::PAD_ID;
use crate::error::{Error, Result};
use crate::frontend::Encoded;
use crate::tensor::{BatchTensor, Matrix};

/// A batch as the network consumes it.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    /// Fixed features, already `batch × time × input_dim`.
    Dense(BatchTensor),
    /// Phone ids for the learned lookup, padded to `time` frames.
    Ids { ids: Vec<Vec<usize>>, time: usize },
}

impl ModelInput {
    /// Pads encoded examples to a common length (at least `min_time`).
    pub fn from_encoded(items: &[&Encoded], min_time: usize) -> Result<Self> {
        match items.first() {
            None => Err(Error::Shape("empty batch".into())),
            Some(Encoded::Ids(_)) => {
                let ids = items
                    .iter()
                    .map(|e| match e {
                        Encoded::Ids(ids) => Ok(ids.clone()),
                        Encoded::Dense(_) => Err(Error::Shape("mixed input kinds in a batch".into())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let time = ids.iter().map(Vec::len).fold(min_time, usize::max);
                Ok(Self::Ids { ids, time })
            }
            Some(Encoded::Dense(_)) => {
                let mats = items
                    .iter()
                    .map(|e| match e {
                        Encoded::Dense(m) => Ok(m),
                        Encoded::Ids(_) => Err(Error::Shape("mixed input kinds in a batch".into())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Dense(BatchTensor::from_sequences(&mats, min_time)?))
            }
        }
    }

    pub fn batch(&self) -> usize {
        match self {
            Self::Dense(x) => x.batch(),
            Self::Ids { ids, .. } => ids.len(),
        }
    }
}

#[derive(Debug, Clone)]
struct BlockCache {
    conv: ConvCache,
    bn: BnCache,
    relu: Vec<bool>,
    dropout: DropoutMask,
}

/// Saved activations of one forward pass, read by [`model_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    ids: Option<(Vec<Vec<usize>>, usize)>,
    blocks: Vec<BlockCache>,
    pool: PoolCache,
    head_input: Matrix,
    head_dropout: DropoutMask,
    embed_dim: usize,
    mode: Mode,
}

fn conv_shape(cfg: &ModelConfig, l: usize) -> ConvShape {
    ConvShape {
        c_out: cfg.channels,
        c_in: cfg.layer_in(l),
        kernel: cfg.kernels[l],
        dilation: cfg.dilations[l],
    }
}

fn lookup(ids: &[Vec<usize>], time: usize, table: &[f64], dim: usize) -> Result<BatchTensor> {
    let rows = table.len() / dim;
    let lengths = ids.iter().map(Vec::len).collect();
    let mut x = BatchTensor::zeros(lengths, time, dim)?;
    for (b, seq) in ids.iter().enumerate() {
        for (t, &id) in seq.iter().enumerate() {
            if id >= rows {
                return Err(Error::Shape(format!("phone id {id} outside {rows} embedding rows")));
            }
            x.frame_mut(b, t).copy_from_slice(&table[id * dim..(id + 1) * dim]);
        }
    }
    Ok(x)
}

pub fn model_forward(
    input: &ModelInput,
    params: &ModelParams,
    cfg: &ModelConfig,
    mode: Mode,
    key: DropoutKey,
) -> Result<(Matrix, ForwardCache)> {
    let (mut x, ids) = match input {
        ModelInput::Dense(x) => {
            if x.channels() != cfg.input_dim {
                return Err(Error::Shape(format!(
                    "input has {} channels, model expects {}",
                    x.channels(),
                    cfg.input_dim
                )));
            }
            (x.clone(), None)
        }
        ModelInput::Ids { ids, time } => {
            if !params.has_embedding() {
                return Err(Error::Shape("phone ids given to a model without an embedding table".into()));
            }
            let x = lookup(ids, *time, params.get(Slot::Embedding), cfg.input_dim)?;
            (x, Some((ids.clone(), *time)))
        }
    };
    let mut blocks = Vec::with_capacity(LAYERS);
    let no_bias = vec![0.0; cfg.channels];
    for l in 0..LAYERS {
        // Batch statistics cancel a per-channel constant exactly, so in
        // training the conv bias only moves the running mean.
        let bias = params.get(Slot::ConvBias(l));
        let (y, conv) = conv1d_forward(
            &x,
            params.get(Slot::ConvWeight(l)),
            if mode == Mode::Train { &no_bias } else { bias },
            conv_shape(cfg, l),
        )?;
        let (mut y, mut bn) = batchnorm_forward(
            &y,
            params.get(Slot::BnScale(l)),
            params.get(Slot::BnShift(l)),
            params.get(Slot::RunningMean(l)),
            params.get(Slot::RunningVar(l)),
            mode,
        )?;
        if mode == Mode::Train {
            bn.shift_batch_mean(bias);
        }
        let relu_mask = relu(y.as_mut_slice());
        let dropout = dropout_batch(&mut y, cfg.dropout_rate, mode, key, l as u64);
        blocks.push(BlockCache {
            conv,
            bn,
            relu: relu_mask,
            dropout,
        });
        x = y;
    }
    let (mut h, pool) = adaptive_avgpool(&x, cfg.pooled_steps)?;
    let head_dropout = dropout(h.as_mut_slice(), cfg.dropout_rate, mode, key, LAYERS as u64);
    let logits = linear_forward(&h, params.get(Slot::HeadWeight), params.get(Slot::HeadBias))?;
    Ok((
        logits,
        ForwardCache {
            ids,
            blocks,
            pool,
            head_input: h,
            head_dropout,
            embed_dim: cfg.input_dim,
            mode,
        },
    ))
}

/// Reverse pass. The padding row of the embedding table never receives
/// gradient.
pub fn model_backward(cache: &ForwardCache, params: &ModelParams, dlogits: &Matrix) -> Result<ModelGrads> {
    let mut grads = params.zeros_like();
    let (mut dh, dw, db) = linear_backward(&cache.head_input, params.get(Slot::HeadWeight), dlogits)?;
    grads.get_mut(Slot::HeadWeight).copy_from_slice(&dw);
    grads.get_mut(Slot::HeadBias).copy_from_slice(&db);
    dropout_backward(&cache.head_dropout, dh.as_mut_slice());
    let mut dx = adaptive_avgpool_backward(&cache.pool, &dh)?;
    for (l, block) in cache.blocks.iter().enumerate().rev() {
        dropout_batch_backward(&block.dropout, &mut dx);
        relu_backward(&block.relu, dx.as_mut_slice());
        let (d, dgamma, dbeta) = batchnorm_backward(&block.bn, params.get(Slot::BnScale(l)), &dx)?;
        grads.get_mut(Slot::BnScale(l)).copy_from_slice(&dgamma);
        grads.get_mut(Slot::BnShift(l)).copy_from_slice(&dbeta);
        let (d, dw, db) = conv1d_backward(&block.conv, params.get(Slot::ConvWeight(l)), &d)?;
        grads.get_mut(Slot::ConvWeight(l)).copy_from_slice(&dw);
        if cache.mode == Mode::Eval {
            grads.get_mut(Slot::ConvBias(l)).copy_from_slice(&db);
        }
        dx = d;
    }
    if let Some((ids, _)) = &cache.ids {
        let dim = cache.embed_dim;
        let table = grads.get_mut(Slot::Embedding);
        for (b, seq) in ids.iter().enumerate() {
            for (t, &id) in seq.iter().enumerate() {
                if id == PAD_ID {
                    continue;
                }
                for (g, d) in table[id * dim..(id + 1) * dim].iter_mut().zip(dx.frame(b, t)) {
                    *g += d;
                }
            }
        }
        table[PAD_ID * dim..(PAD_ID + 1) * dim].fill(0.0);
    }
    Ok(grads)
}

impl ModelParams {
    /// Folds a train-mode forward pass's batch statistics into the running
    /// mean and variance of every batch-norm layer.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (l, block) in cache.blocks.iter().enumerate() {
            let (mi, vi) = (self.index(Slot::RunningMean(l)), self.index(Slot::RunningVar(l)));
            let entries = self.entries_mut();
            let mut mean = std::mem::take(&mut entries[mi].data);
            update_running_stats(&mut mean, &mut entries[vi].data, &block.bn);
            entries[mi].data = mean;
        }
    }
}

/// Result of one training-mode forward and reverse pass.
#[derive(Debug, Clone)]
pub struct Step {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    pub grads: ModelGrads,
    pub logits: Matrix,
    pub cache: ForwardCache,
}

pub fn loss_and_grads(
    input: &ModelInput,
    labels: &[usize],
    params: &ModelParams,
    cfg: &ModelConfig,
    key: DropoutKey,
) -> Result<Step> {
    let (logits, cache) = model_forward(input, params, cfg, Mode::Train, key)?;
    let (loss, dlogits) = softmax_cross_entropy(&logits, labels)?;
    let grads = model_backward(&cache, params, &dlogits)?;
    Ok(Step {
        loss,
        grads,
        logits,
        cache,
    })
}

/// Index of the largest logit per row; ties go to the lowest index.
pub fn predict(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            logits
                .row(r)
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}
