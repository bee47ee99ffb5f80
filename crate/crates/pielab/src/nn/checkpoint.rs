//! Bit-exact checkpoint files.
//!
//! Layout: magic `PIELAB1\n`, a little-endian u32 length prefix, a JSON
//! metadata block (spec, epoch, RNG state, array directory with offsets),
//! the raw payload (little-endian f32 arrays; bit-packed mask arrays named
//! `<layer>.mask`), and a CRC32 of the payload. Save -> load -> save is
//! byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::{layer_defs, Layer, ModelSpec, NnError, OptState, ParamSet, Tensor};
use crate::prune::PruneMask;

const MAGIC: &[u8; 8] = b"PIELAB1\n";
const FORMAT_VERSION: u32 = 1;

/// Serializable RNG state (ChaCha8 seed plus stream position).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    /// 32-byte seed, hex encoded.
    pub seed_hex: String,
    /// Word position within the stream, decimal encoded (u128).
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &rand_chacha::ChaCha8Rng) -> Self {
        let seed = rng.get_seed();
        let mut seed_hex = String::with_capacity(64);
        for b in seed {
            seed_hex.push_str(&format!("{b:02x}"));
        }
        RngState {
            seed_hex,
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<rand_chacha::ChaCha8Rng, NnError> {
        use rand::SeedableRng;
        if self.seed_hex.len() != 64 {
            return Err(NnError::BadMetadata(format!(
                "rng seed must be 64 hex chars, got {}",
                self.seed_hex.len()
            )));
        }
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.iter_mut().enumerate() {
            *chunk = u8::from_str_radix(&self.seed_hex[2 * i..2 * i + 2], 16)
                .map_err(|e| NnError::BadMetadata(format!("bad rng seed hex: {e}")))?;
        }
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|e| NnError::BadMetadata(format!("bad rng word_pos: {e}")))?;
        let mut rng = rand_chacha::ChaCha8Rng::from_seed(seed);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Full training-state snapshot at the end of an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub epoch: u32,
    pub params: ParamSet,
    pub opt_state: OptState,
    pub mask: Option<PruneMask>,
    pub rng: RngState,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    dtype: String,
    len: u64,
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    format_version: u32,
    spec: ModelSpec,
    epoch: u32,
    rng: RngState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask_target: Option<f64>,
    arrays: Vec<ArrayEntry>,
}

fn push_f32_array(payload: &mut Vec<u8>, arrays: &mut Vec<ArrayEntry>, name: &str, values: &[f32]) {
    arrays.push(ArrayEntry {
        name: name.to_string(),
        dtype: "f32".into(),
        len: values.len() as u64,
        offset: payload.len() as u64,
    });
    for v in values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
}

fn push_bits_array(payload: &mut Vec<u8>, arrays: &mut Vec<ArrayEntry>, name: &str, bits: &[bool]) {
    arrays.push(ArrayEntry {
        name: name.to_string(),
        dtype: "bits".into(),
        len: bits.len() as u64,
        offset: payload.len() as u64,
    });
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    payload.extend_from_slice(&bytes);
}

/// Write a checkpoint file.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), NnError> {
    let mut payload = Vec::new();
    let mut arrays = Vec::new();
    for layer in &ckpt.params.layers {
        push_f32_array(&mut payload, &mut arrays, &layer.name, layer.tensor.data());
    }
    for (layer, velocity) in ckpt.params.layers.iter().zip(&ckpt.opt_state.velocity) {
        push_f32_array(
            &mut payload,
            &mut arrays,
            &format!("{}.velocity", layer.name),
            velocity,
        );
    }
    if let Some(mask) = &ckpt.mask {
        for layer in &ckpt.params.layers {
            if let Some(bits) = mask.layer_bits(&layer.name) {
                push_bits_array(
                    &mut payload,
                    &mut arrays,
                    &format!("{}.mask", layer.name),
                    bits,
                );
            }
        }
    }

    let meta = CheckpointMeta {
        format_version: ckpt.format_version,
        spec: ckpt.spec.clone(),
        epoch: ckpt.epoch,
        rng: ckpt.rng.clone(),
        mask_target: ckpt.mask.as_ref().map(|m| m.target()),
        arrays,
    };
    let meta_bytes =
        serde_json::to_vec(&meta).map_err(|e| NnError::BadMetadata(format!("serialize: {e}")))?;

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + meta_bytes.len() + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(meta_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    fs::write(path, out).map_err(|e| NnError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn array_byte_len(entry: &ArrayEntry) -> Result<usize, NnError> {
    match entry.dtype.as_str() {
        "f32" => Ok(entry.len as usize * 4),
        "bits" => Ok((entry.len as usize).div_ceil(8)),
        other => Err(NnError::BadMetadata(format!("unknown dtype {other}"))),
    }
}

/// Read a checkpoint file, verifying magic, version, and payload checksum.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let bytes = fs::read(path).map_err(|e| NnError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if bytes.len() < MAGIC.len() + 4 {
        return Err(NnError::Truncated);
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(NnError::BadMagic);
    }
    let meta_len =
        u32::from_le_bytes(bytes[MAGIC.len()..MAGIC.len() + 4].try_into().unwrap()) as usize;
    let meta_start = MAGIC.len() + 4;
    if bytes.len() < meta_start + meta_len {
        return Err(NnError::Truncated);
    }
    let meta: CheckpointMeta = serde_json::from_slice(&bytes[meta_start..meta_start + meta_len])
        .map_err(|e| NnError::BadMetadata(e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(NnError::UnsupportedVersion(meta.format_version));
    }

    let payload_len: usize = meta
        .arrays
        .iter()
        .map(array_byte_len)
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .sum();
    let payload_start = meta_start + meta_len;
    if bytes.len() != payload_start + payload_len + 4 {
        return Err(NnError::Truncated);
    }
    let payload = &bytes[payload_start..payload_start + payload_len];
    let stored_crc = u32::from_le_bytes(bytes[payload_start + payload_len..].try_into().unwrap());
    if crc32fast::hash(payload) != stored_crc {
        return Err(NnError::ChecksumMismatch);
    }

    let read_f32 = |name: &str| -> Result<Vec<f32>, NnError> {
        let entry = meta
            .arrays
            .iter()
            .find(|a| a.name == name && a.dtype == "f32")
            .ok_or_else(|| NnError::MissingArray(name.to_string()))?;
        let start = entry.offset as usize;
        let end = start + entry.len as usize * 4;
        if end > payload.len() {
            return Err(NnError::Truncated);
        }
        Ok(payload[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let read_bits = |name: &str| -> Result<Option<Vec<bool>>, NnError> {
        let Some(entry) = meta
            .arrays
            .iter()
            .find(|a| a.name == name && a.dtype == "bits")
        else {
            return Ok(None);
        };
        let start = entry.offset as usize;
        let end = start + (entry.len as usize).div_ceil(8);
        if end > payload.len() {
            return Err(NnError::Truncated);
        }
        let packed = &payload[start..end];
        Ok(Some(
            (0..entry.len as usize)
                .map(|i| packed[i / 8] & (1 << (i % 8)) != 0)
                .collect(),
        ))
    };

    let mut layers = Vec::new();
    let mut velocity = Vec::new();
    let mut mask_layers: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    for (name, role, shape) in layer_defs(&meta.spec) {
        let data = read_f32(&name)?;
        if data.len() != shape.iter().product::<usize>() {
            return Err(NnError::ShapeMismatch(format!(
                "array {name} has {} values, expected {}",
                data.len(),
                shape.iter().product::<usize>()
            )));
        }
        velocity.push(read_f32(&format!("{name}.velocity"))?);
        if let Some(bits) = read_bits(&format!("{name}.mask"))? {
            mask_layers.insert(name.clone(), bits);
        }
        layers.push(Layer {
            name,
            prunable: role.prunable(),
            role,
            tensor: Tensor::from_vec(shape, data),
        });
    }
    let mask = if mask_layers.is_empty() {
        None
    } else {
        Some(PruneMask::from_parts(
            meta.mask_target.unwrap_or(0.0),
            mask_layers,
        ))
    };

    Ok(Checkpoint {
        format_version: meta.format_version,
        spec: meta.spec.clone(),
        epoch: meta.epoch,
        params: ParamSet {
            spec: meta.spec,
            layers,
        },
        opt_state: OptState { velocity },
        mask,
        rng: meta.rng,
    })
}
