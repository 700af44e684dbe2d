use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "PROPHETLAB_THREADS";

/// `seed_i = first 8 bytes of sha256(master || index)`, little endian.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Hex sha256 of the compact JSON form of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config).context("serializing config for hashing")?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// A rayon pool sized by `PROPHETLAB_THREADS`, or rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_VAR) {
        let threads: usize = value
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_VAR} must be a positive integer, got {value:?}"))?;
        builder = builder.num_threads(threads.max(1));
    }
    builder.build().context("building worker pool")
}
