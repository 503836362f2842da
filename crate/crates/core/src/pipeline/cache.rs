//! On-disk saliency-map cache: `cache/<method>/<image_id>.smap`.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use log::warn;

use crate::error::{Error, Result};
use crate::tensor::SaliencyMap;

/// Rounds a map through the stored `f32` representation, so a freshly
/// computed map and its cached copy score identically.
pub fn quantize(map: &SaliencyMap) -> SaliencyMap {
    map.map(|v| v as f32 as f64).expect("f32 rounding of a finite map stays finite")
}

#[derive(Debug)]
pub struct MapCache {
    root: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl MapCache {
    /// Cache rooted at `<output>/cache`.
    pub fn new(output: &Path) -> Self {
        Self {
            root: output.join("cache"),
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn path(&self, method: &str, image_id: &str) -> PathBuf {
        self.root.join(method).join(format!("{image_id}.smap"))
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    /// Stored map, `None` when absent. A corrupt or wrongly sized entry is
    /// reported and treated as absent.
    pub fn fetch(&self, method: &str, image_id: &str, dims: (usize, usize)) -> Option<SaliencyMap> {
        let path = self.path(method, image_id);
        match SaliencyMap::load_smap(&path) {
            Ok(m) if (m.height(), m.width()) == dims => Some(m),
            Ok(m) => {
                warn!(
                    "cache entry {} is {}x{}, expected {}x{}; recomputing",
                    path.display(),
                    m.height(),
                    m.width(),
                    dims.0,
                    dims.1
                );
                None
            }
            Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => {
                warn!("cache entry {} unreadable ({e}); recomputing", path.display());
                None
            }
        }
    }

    pub fn store(&self, method: &str, image_id: &str, map: &SaliencyMap) -> Result<()> {
        let path = self.path(method, image_id);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        // write-then-rename so a crash never leaves a truncated entry
        let tmp = path.with_extension("smap.tmp");
        std::fs::write(&tmp, map.to_smap_bytes())?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Cached map if present, otherwise `compute`, store and return the
    /// quantized result.
    pub fn fetch_or_compute(
        &self,
        method: &str,
        image_id: &str,
        dims: (usize, usize),
        compute: impl FnOnce() -> Result<SaliencyMap>,
    ) -> Result<SaliencyMap> {
        if let Some(m) = self.fetch(method, image_id, dims) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(m);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let map = quantize(&compute()?);
        self.store(method, image_id, &map)?;
        Ok(map)
    }
}
