//! Content-addressed on-disk cache of convolution powers.
//!
//! A power is keyed by the SHA-256 of the format version, the serialized
//! step measure, the truncation threshold and the exponent. Entries are
//! written atomically and a corrupt or mismatched entry is recomputed, so a
//! cache hit can never change a result.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::exec::Workers;
use crate::measure::{FiniteMeasure, MEASURE_FORMAT_VERSION};
use crate::weight::Weight;

/// Environment variable that overrides the default cache directory.
pub const CACHE_DIR_ENV: &str = "WALKLAB_CACHE_DIR";

#[derive(Clone, Debug)]
pub struct PowerCache {
    dir: PathBuf,
}

impl PowerCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        PowerCache { dir: dir.into() }
    }

    /// The directory named by [`CACHE_DIR_ENV`], if set and nonempty.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PowerCache::new)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key<W: Weight>(mu: &FiniteMeasure<W>, threshold: &W, n: usize) -> Result<String> {
        let mut serialized = Vec::new();
        mu.write_to(&mut serialized)?;
        let mut hasher = Sha256::new();
        hasher.update(format!("walklab-power v{MEASURE_FORMAT_VERSION}\n").as_bytes());
        hasher.update(&serialized);
        hasher.update(format!("threshold {}\nn {n}\n", threshold.render()).as_bytes());
        Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("power-{key}.txt"))
    }

    /// `mu^{*n}`, read from the cache when present.
    pub fn power<W: Weight>(&self, mu: &FiniteMeasure<W>, n: usize, threshold: &W, workers: Workers) -> Result<FiniteMeasure<W>> {
        Ok(self.powers(mu, n, threshold, workers)?.pop().expect("powers include n"))
    }

    /// `[mu^{*0}, ..., mu^{*n}]`, extending the longest cached prefix.
    pub fn powers<W: Weight>(&self, mu: &FiniteMeasure<W>, n: usize, threshold: &W, workers: Workers) -> Result<Vec<FiniteMeasure<W>>> {
        let mut out = vec![FiniteMeasure::identity(mu.group())];
        for k in 1..=n {
            let key = Self::key(mu, threshold, k)?;
            let path = self.path_for(&key);
            let cached = fs::File::open(&path)
                .ok()
                .and_then(|f| FiniteMeasure::<W>::read_from(BufReader::new(f)).ok())
                .filter(|m| m.group() == mu.group());
            let next = match cached {
                Some(m) => m,
                None => {
                    let m = out[k - 1].convolve(mu, threshold, workers)?;
                    self.store(&path, &m)?;
                    m
                }
            };
            out.push(next);
        }
        Ok(out)
    }

    fn store<W: Weight>(&self, path: &Path, m: &FiniteMeasure<W>) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        m.write_to(BufWriter::new(fs::File::create(&tmp)?))?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}
