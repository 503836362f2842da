//! Dense image and attribution-map types plus the ordering utilities the
//! perturbation metrics are built on.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A `C×H×W` image stored row-major as (channel, row, column).
///
/// Inside the harness pixel values live in `[0, 1]` image space; dataset
/// normalization is applied at the model boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Dimension("image needs at least one channel".into()));
        }
        if height < 2 || width < 2 {
            return Err(Error::Dimension(format!(
                "image must be at least 2x2, got {height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::Dimension(format!(
                "expected {} values for {channels}x{height}x{width}, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite image value at index {i}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> Shape {
        Shape {
            channels: self.channels,
            height: self.height,
            width: self.width,
        }
    }

    /// Number of spatial positions (`H·W`).
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    /// Value of `channel` at flat pixel index `pixel`.
    #[inline]
    pub fn at(&self, channel: usize, pixel: usize) -> f64 {
        self.data[channel * self.pixel_count() + pixel]
    }

    /// Unweighted mean over channels at flat pixel index `pixel`.
    pub fn channel_mean(&self, pixel: usize) -> f64 {
        let n = self.pixel_count();
        (0..self.channels).map(|c| self.data[c * n + pixel]).sum::<f64>() / self.channels as f64
    }

    /// Channel-mean grayscale image, length `H·W`.
    pub fn grayscale(&self) -> Vec<f64> {
        (0..self.pixel_count()).map(|p| self.channel_mean(p)).collect()
    }

    /// Euclidean distance between two images of the same shape.
    pub fn l2_distance(&self, other: &ImageTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Model input geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// An `H×W` attribution grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension("saliency map must be non-empty".into()));
        }
        if data.len() != height * width {
            return Err(Error::Dimension(format!(
                "expected {} values for a {height}x{width} map, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite attribution at index {i}")));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn matches(&self, shape: Shape) -> bool {
        self.height == shape.height && self.width == shape.width
    }

    pub fn l2_distance(&self, other: &SaliencyMap) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Serializes to the SMAP cache format: `"SMAP"`, version, H, W as
    /// little-endian `u32`, then `H·W` little-endian `f32` values.
    pub fn to_smap_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SMAP_HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(SMAP_MAGIC);
        out.extend_from_slice(&SMAP_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_smap_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt_err = |offset: usize, reason: &str| Error::Format {
            offset,
            reason: reason.to_string(),
        };
        if bytes.len() < SMAP_HEADER_LEN {
            return Err(fmt_err(bytes.len(), "truncated header"));
        }
        if &bytes[0..4] != SMAP_MAGIC {
            return Err(fmt_err(0, "bad magic, expected \"SMAP\""));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        if word(4) != SMAP_VERSION {
            return Err(fmt_err(4, &format!("unsupported version {}", word(4))));
        }
        let (height, width) = (word(8) as usize, word(12) as usize);
        if height == 0 || width == 0 {
            return Err(fmt_err(8, "zero dimension"));
        }
        let expected = SMAP_HEADER_LEN + 4 * height * width;
        if bytes.len() < expected {
            return Err(fmt_err(bytes.len(), "truncated payload"));
        }
        if bytes.len() > expected {
            return Err(fmt_err(expected, "trailing bytes after payload"));
        }
        let mut data = Vec::with_capacity(height * width);
        for (i, chunk) in bytes[SMAP_HEADER_LEN..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(fmt_err(SMAP_HEADER_LEN + 4 * i, "non-finite value"));
            }
            data.push(f64::from(v));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn save_smap(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_smap_bytes())?;
        Ok(())
    }

    pub fn load_smap(path: &Path) -> Result<Self> {
        Self::from_smap_bytes(&fs::read(path)?)
    }
}

pub const SMAP_MAGIC: &[u8; 4] = b"SMAP";
pub const SMAP_VERSION: u32 = 1;
pub const SMAP_HEADER_LEN: usize = 16;

/// Min-max rescale to `[0, 1]`. A constant map becomes all zeros.
pub fn normalize_map(map: &SaliencyMap) -> SaliencyMap {
    let (lo, hi) = min_max(map.data());
    let range = hi - lo;
    let data = if range > 0.0 {
        map.data().iter().map(|v| (v - lo) / range).collect()
    } else {
        vec![0.0; map.len()]
    };
    SaliencyMap {
        height: map.height,
        width: map.width,
        data,
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Unit of feature removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    Pixel,
    /// Square `size×size` patches tiling the image row-major.
    Patch(usize),
}

impl Granularity {
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        match *self {
            Granularity::Pixel => Ok(()),
            Granularity::Patch(0) => Err(Error::Dimension("patch size must be positive".into())),
            Granularity::Patch(s) if height % s != 0 || width % s != 0 => Err(Error::Dimension(
                format!("patch size {s} does not divide {height}x{width}"),
            )),
            Granularity::Patch(_) => Ok(()),
        }
    }

    /// Number of features at this granularity. Assumes `validate` passed.
    pub fn feature_count(&self, height: usize, width: usize) -> usize {
        match *self {
            Granularity::Pixel => height * width,
            Granularity::Patch(s) => (height / s) * (width / s),
        }
    }

    /// Flat pixel indices covered by `feature`.
    pub fn pixels_of(&self, feature: usize, width: usize) -> Vec<usize> {
        match *self {
            Granularity::Pixel => vec![feature],
            Granularity::Patch(s) => {
                let per_row = width / s;
                let (pr, pc) = (feature / per_row, feature % per_row);
                let mut out = Vec::with_capacity(s * s);
                for r in pr * s..(pr + 1) * s {
                    for c in pc * s..(pc + 1) * s {
                        out.push(r * width + c);
                    }
                }
                out
            }
        }
    }
}

/// Features sorted by descending absolute attribution, ties by ascending index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureOrdering {
    pub granularity: Granularity,
    pub indices: Vec<usize>,
}

/// Absolute attribution per feature (patch score = sum of `|a|` in the patch).
pub fn feature_scores(map: &SaliencyMap, granularity: Granularity) -> Result<Vec<f64>> {
    granularity.validate(map.height, map.width)?;
    Ok(match granularity {
        Granularity::Pixel => map.data.iter().map(|v| v.abs()).collect(),
        Granularity::Patch(_) => (0..granularity.feature_count(map.height, map.width))
            .map(|f| {
                granularity
                    .pixels_of(f, map.width)
                    .into_iter()
                    .map(|p| map.data[p].abs())
                    .sum()
            })
            .collect(),
    })
}

/// Signed attribution summed over each feature.
pub fn feature_sums(map: &SaliencyMap, granularity: Granularity) -> Result<Vec<f64>> {
    granularity.validate(map.height, map.width)?;
    Ok((0..granularity.feature_count(map.height, map.width))
        .map(|f| {
            granularity
                .pixels_of(f, map.width)
                .into_iter()
                .map(|p| map.data[p])
                .sum()
        })
        .collect())
}

pub fn descending_order(map: &SaliencyMap, granularity: Granularity) -> Result<FeatureOrdering> {
    let scores = feature_scores(map, granularity)?;
    let mut indices: Vec<usize> = (0..scores.len()).collect();
    // sort_by is stable, so equal scores keep ascending index order
    indices.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    Ok(FeatureOrdering {
        granularity,
        indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map(h: usize, w: usize, v: &[f64]) -> SaliencyMap {
        SaliencyMap::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_map(&map(2, 2, &[0., 1., 2., 3.])).data(),
            &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]
        );
        assert_eq!(normalize_map(&map(2, 2, &[5.; 4])).data(), &[0.0; 4]);
        assert_eq!(
            normalize_map(&map(2, 2, &[-1., 0., 0., 1.])).data(),
            &[0.0, 0.5, 0.5, 1.0]
        );
    }

    #[test]
    fn pixel_order_breaks_ties_by_index() {
        let o = descending_order(&map(2, 2, &[3., 1., 2., 2.]), Granularity::Pixel).unwrap();
        assert_eq!(o.indices, vec![0, 2, 3, 1]);
        let o = descending_order(&map(3, 3, &[0.7; 9]), Granularity::Pixel).unwrap();
        assert_eq!(o.indices, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn ordering_uses_magnitude() {
        let o = descending_order(&map(2, 2, &[1., -4., 2., 0.]), Granularity::Pixel).unwrap();
        assert_eq!(o.indices, vec![1, 2, 0, 3]);
    }

    #[test]
    fn hot_patch_comes_first() {
        let mut v = vec![0.1; 16];
        for p in [10, 11, 14, 15] {
            v[p] = 5.0;
        }
        let o = descending_order(&map(4, 4, &v), Granularity::Patch(2)).unwrap();
        assert_eq!(o.indices[0], 3);
        assert_eq!(o.indices.len(), 4);
    }

    #[test]
    fn non_dividing_patch_is_rejected() {
        let err = descending_order(&map(4, 4, &[0.; 16]), Granularity::Patch(3)).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn smap_layout_and_errors() {
        let m = map(2, 2, &[0., 1., 2., 3.]);
        let bytes = m.to_smap_bytes();
        assert_eq!(bytes.len(), 16 + 16);
        assert_eq!(&bytes[..4], b"SMAP");
        assert_eq!(SaliencyMap::from_smap_bytes(&bytes).unwrap(), m);

        let err = SaliencyMap::from_smap_bytes(&bytes[..30]).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 30, .. }));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            SaliencyMap::from_smap_bytes(&bad),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut bad = bytes;
        bad[4] = 2;
        assert!(matches!(
            SaliencyMap::from_smap_bytes(&bad),
            Err(Error::Format { offset: 4, .. })
        ));
    }

    #[test]
    fn image_validation() {
        assert!(ImageTensor::new(1, 1, 4, vec![0.0; 4]).is_err());
        assert!(ImageTensor::new(1, 2, 2, vec![0.0; 3]).is_err());
        assert!(ImageTensor::new(1, 2, 2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        let img = ImageTensor::new(2, 2, 2, vec![0., 1., 2., 3., 4., 5., 6., 7.]).unwrap();
        assert_eq!(img.channel_mean(1), 3.0);
        assert_eq!(img.get(1, 1, 0), 6.0);
    }

    proptest! {
        #[test]
        fn ordering_is_a_permutation(v in prop::collection::vec(-5.0f64..5.0, 16)) {
            let m = map(4, 4, &v);
            for g in [Granularity::Pixel, Granularity::Patch(2), Granularity::Patch(4)] {
                let mut idx = descending_order(&m, g).unwrap().indices;
                idx.sort_unstable();
                prop_assert_eq!(idx, (0..g.feature_count(4, 4)).collect::<Vec<_>>());
            }
        }

        #[test]
        fn unit_patches_match_pixels(v in prop::collection::vec(-1.0f64..1.0, 12)) {
            let m = map(3, 4, &v);
            prop_assert_eq!(
                descending_order(&m, Granularity::Patch(1)).unwrap().indices,
                descending_order(&m, Granularity::Pixel).unwrap().indices
            );
        }

        #[test]
        fn normalize_is_idempotent(v in prop::collection::vec(-3.0f64..3.0, 9)) {
            let m = map(3, 3, &v);
            let once = normalize_map(&m);
            let twice = normalize_map(&once);
            for (a, b) in once.data().iter().zip(twice.data()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
