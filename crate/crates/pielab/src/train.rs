//! Shared single-run training loop (crate-internal plumbing).
//!
//! One run is single-threaded and fully determined by its seed-derived RNG:
//! per-epoch shuffles, mini-batch SGD steps, an end-of-epoch divergence
//! check, and an end-of-epoch callback for checkpoint writing.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::corpus::EncodedExample;
use crate::nn::{self, Checkpoint, Hyper, OptState, ParamSet, RngState};
use crate::prune::{PruneError, PruneMask};

/// Run the epochs in `epochs` (inclusive, 1-based), invoking the callback at
/// every epoch end. Masked positions receive no updates. Returns
/// `PruneError::Diverged` when parameters stop being finite.
#[allow(clippy::too_many_arguments)]
pub(crate) fn train_epochs(
    params: &mut ParamSet,
    opt: &mut OptState,
    rng: &mut ChaCha8Rng,
    data: &[EncodedExample],
    hyper: &Hyper,
    batch_size: usize,
    mask: Option<&PruneMask>,
    epochs: RangeInclusive<u32>,
    mut on_epoch_end: impl FnMut(u32, &ParamSet, &OptState, &ChaCha8Rng) -> Result<(), PruneError>,
) -> Result<(), PruneError> {
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<EncodedExample> = chunk.iter().map(|&i| data[i].clone()).collect();
            let grads = nn::backward(params, &batch)?;
            nn::opt_step(params, &grads, mask, opt, hyper);
        }
        if !params_finite(params) {
            return Err(PruneError::Diverged { epoch });
        }
        on_epoch_end(epoch, params, opt, rng)?;
    }
    Ok(())
}

fn params_finite(params: &ParamSet) -> bool {
    params
        .layers
        .iter()
        .all(|l| l.tensor.data().iter().all(|x| x.is_finite()))
}

/// Standard checkpoint file name for an epoch.
pub(crate) fn checkpoint_path(dir: &Path, epoch: u32) -> PathBuf {
    dir.join(format!("checkpoint_epoch_{epoch}.bin"))
}

/// Write the end-of-epoch snapshot into `dir`.
pub(crate) fn write_epoch_checkpoint(
    dir: &Path,
    epoch: u32,
    params: &ParamSet,
    opt: &OptState,
    mask: Option<&PruneMask>,
    rng: &ChaCha8Rng,
) -> Result<PathBuf, PruneError> {
    let path = checkpoint_path(dir, epoch);
    let ckpt = Checkpoint {
        format_version: 1,
        spec: params.spec.clone(),
        epoch,
        params: params.clone(),
        opt_state: opt.clone(),
        mask: mask.cloned(),
        rng: RngState::capture(rng),
    };
    nn::save_checkpoint(&path, &ckpt)?;
    Ok(path)
}
