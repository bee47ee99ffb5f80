//! Checkpoint files: byte-exact round trips, the array directory, CRC
//! verification, and restoring the training RNG stream.
//!
//! Run with: cargo run --example checkpoint_io

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pielab::corpus::LabelKind;
use pielab::nn::{
    init_params, load_checkpoint, save_checkpoint, Checkpoint, ModelFamily, ModelSpec, OptState,
    RngState,
};

fn main() {
    let spec = ModelSpec {
        family: ModelFamily::Bilstm,
        vocab_size: 50,
        embedding_dim: 8,
        hidden_dim: 6,
        num_classes: 2,
        kind: LabelKind::Single,
    };
    let params = init_params(&spec, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let _advance: u64 = rng.gen();

    let ckpt = Checkpoint {
        format_version: 1,
        spec,
        epoch: 4,
        opt_state: OptState::new(&params),
        params,
        mask: None,
        rng: RngState::capture(&rng),
    };

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("epoch4_a.bin");
    let b = dir.path().join("epoch4_b.bin");
    save_checkpoint(&a, &ckpt).unwrap();
    let loaded = load_checkpoint(&a).unwrap();
    save_checkpoint(&b, &loaded).unwrap();

    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    println!("checkpoint size: {} bytes", bytes_a.len());
    println!(
        "save -> load -> save byte-identical: {}",
        bytes_a == bytes_b
    );
    println!(
        "magic: {:?}",
        std::str::from_utf8(&bytes_a[..8]).unwrap().trim_end()
    );
    println!(
        "layers: {:?}",
        loaded
            .params
            .layers
            .iter()
            .map(|l| l.name.as_str())
            .collect::<Vec<_>>()
    );

    // The restored RNG continues the exact stream.
    let mut restored = loaded.rng.restore().unwrap();
    println!(
        "rng stream continues identically: {}",
        rng.gen::<u64>() == restored.gen::<u64>()
    );

    // Corruption never goes unnoticed.
    let mut corrupted = bytes_a.clone();
    let n = corrupted.len();
    corrupted[n - 10] ^= 0x01;
    let c = dir.path().join("corrupted.bin");
    std::fs::write(&c, corrupted).unwrap();
    println!("corrupted payload: {:?}", load_checkpoint(&c).unwrap_err());
}
