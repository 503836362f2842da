//! Image sources: a seeded synthetic generator and PNG directories.

use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use log::warn;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::ImageTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: ImageTensor,
}

/// A file that could not be ingested.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestFailure {
    pub path: PathBuf,
    pub reason: String,
}

/// `count` images of smooth colour blobs on a flat background. Image `i`
/// depends only on `(seed, i)`.
pub fn synthetic_images(count: usize, channels: usize, height: usize, width: usize, seed: u64) -> Result<Vec<Sample>> {
    (0..count)
        .map(|i| {
            Ok(Sample {
                id: format!("synthetic_{i:05}"),
                image: synthetic_image(channels, height, width, seed::derive(seed, i as u64))?,
            })
        })
        .collect()
}

const BLOBS: usize = 3;

pub fn synthetic_image(channels: usize, height: usize, width: usize, seed: u64) -> Result<ImageTensor> {
    let mut rng = seed::rng(seed);
    let base: Vec<f64> = (0..channels).map(|_| rng.gen_range(0.2..0.8)).collect();
    let scale = height.min(width) as f64;
    let blobs: Vec<(f64, f64, f64, Vec<f64>)> = (0..BLOBS)
        .map(|_| {
            let cy = rng.gen_range(0.0..height as f64);
            let cx = rng.gen_range(0.0..width as f64);
            let sigma = rng.gen_range(scale / 10.0..scale / 4.0);
            let amp = (0..channels).map(|_| rng.gen_range(-0.4..0.4)).collect();
            (cy, cx, sigma, amp)
        })
        .collect();
    let mut data = Vec::with_capacity(channels * height * width);
    for (c, b) in base.iter().enumerate() {
        for r in 0..height {
            for col in 0..width {
                let mut v = *b;
                for (cy, cx, sigma, amp) in &blobs {
                    let d2 = (r as f64 - cy).powi(2) + (col as f64 - cx).powi(2);
                    v += amp[c] * (-d2 / (2.0 * sigma * sigma)).exp();
                }
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    ImageTensor::new(channels, height, width, data)
}

/// Decodes one PNG, resizes it bilinearly and scales it to `[0, 1]`.
/// `channels` is 1 (luma) or 3 (RGB).
pub fn load_png(path: &Path, channels: usize, height: usize, width: usize) -> Result<ImageTensor> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let (w, h) = (width as u32, height as u32);
    let planes: Vec<Vec<f32>> = match channels {
        1 => {
            let luma = image::imageops::resize(&img.to_luma32f(), w, h, FilterType::Triangle);
            vec![luma.pixels().map(|p| p.0[0]).collect()]
        }
        3 => {
            let rgb = image::imageops::resize(&img.to_rgb32f(), w, h, FilterType::Triangle);
            (0..3).map(|c| rgb.pixels().map(|p| p.0[c]).collect()).collect()
        }
        other => {
            return Err(Error::Config(format!("PNG ingestion supports 1 or 3 channels, not {other}")))
        }
    };
    let data = planes
        .into_iter()
        .flatten()
        .map(|v| (v as f64).clamp(0.0, 1.0))
        .collect();
    ImageTensor::new(channels, height, width, data)
}

/// All `*.png` files in `dir` in name order. Files that fail to decode are
/// reported and skipped; ids are file stems.
pub fn png_directory(
    dir: &Path,
    channels: usize,
    height: usize,
    width: usize,
    limit: Option<usize>,
) -> Result<(Vec<Sample>, Vec<IngestFailure>)> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("cannot read image directory {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| x.eq_ignore_ascii_case("png"))
        })
        .collect();
    paths.sort();
    if let Some(n) = limit {
        paths.truncate(n);
    }
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for path in paths {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_owned)
            .filter(|s| !s.contains(',') && !s.contains('"'));
        let result = match id {
            Some(id) => load_png(&path, channels, height, width).map(|image| Sample { id, image }),
            None => Err(Error::Input("file name is not a usable image id".into())),
        };
        match result {
            Ok(s) => samples.push(s),
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                failures.push(IngestFailure {
                    reason: e.to_string(),
                    path,
                });
            }
        }
    }
    Ok((samples, failures))
}
