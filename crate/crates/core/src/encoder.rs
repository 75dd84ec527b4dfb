//! Frozen dual-encoder interface and the bundled desk-scale backbone.
//!
//! The bundled encoder hashes word, character-trigram, and image-cell
//! features into a fixed bucket space and applies a frozen random
//! projection, giving deterministic embeddings whose cosine structure
//! tracks surface overlap. Real pretrained backbones plug in through the
//! same trait and weight-archive interface.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::math;
use crate::rng::Stream;
use crate::tensor::{l2_normalize, Matrix};
use crate::tokenizer::split_tokens;

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Embedding {
            values,
            normalized: false,
        }
    }

    pub fn normalize(mut self) -> Self {
        l2_normalize(&mut self.values);
        self.normalized = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextEmbedding {
    pub embedding: Embedding,
    /// Set when the text exceeded the context window and was cut off.
    pub truncated: bool,
}

/// Decoded image pixels, row-major RGB.
#[derive(Clone, Debug)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self, CoreError> {
        if rgb.len() != width * height * 3 {
            return Err(CoreError::Shape(format!(
                "raster byte count {} does not match {width}x{height} RGB",
                rgb.len()
            )));
        }
        Ok(Raster { width, height, rgb })
    }
}

pub trait DualEncoder {
    /// Embedding dimensionality d_enc.
    fn dim(&self) -> usize;
    /// Stable identifier recorded in checkpoints and caches.
    fn id(&self) -> &str;
    fn embed_text(&self, text: &str) -> Result<TextEmbedding, CoreError>;
    fn embed_image(&self, image: &Raster) -> Result<Embedding, CoreError>;
}

/// Zero-mean i.i.d. Gaussian vector with the given per-component variance.
pub fn noise_sample(dim: usize, variance: f64, rng: &mut Stream) -> Vec<f64> {
    let std = math::sqrt(variance);
    (0..dim).map(|_| rng.normal() * std).collect()
}

/// Add zero-mean Gaussian noise of the given variance to each component,
/// then re-normalize. Variance zero is exactly the identity.
pub fn inject_noise(
    e: &Embedding,
    variance: f64,
    rng: &mut Stream,
) -> Result<Embedding, CoreError> {
    if variance < 0.0 {
        return Err(CoreError::Domain(format!(
            "noise variance {variance} is negative"
        )));
    }
    if variance == 0.0 {
        return Ok(e.clone());
    }
    let noise = noise_sample(e.values.len(), variance, rng);
    let values: Vec<f64> = e.values.iter().zip(&noise).map(|(v, n)| v + n).collect();
    Ok(Embedding::new(values).normalize())
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

pub struct HashProjectionEncoder {
    id: String,
    projection: Matrix,
    context_window: usize,
}

impl core::fmt::Debug for HashProjectionEncoder {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("HashProjectionEncoder")
            .field("id", &self.id)
            .field("rows", &self.projection.rows)
            .field("cols", &self.projection.cols)
            .field("context_window", &self.context_window)
            .finish()
    }
}

pub const DEFAULT_ENCODER_ID: &str = "hashclip-512-v1";
const DEFAULT_DIM: usize = 512;
const BUCKETS: usize = 8192;
const CONTEXT_WINDOW: usize = 77;
const IMAGE_GRID: usize = 8;
const LEVELS: usize = 8;

impl HashProjectionEncoder {
    /// Deterministically generate the frozen projection for an encoder id.
    pub fn generate(id: &str) -> Self {
        let mut rng = Stream::derive(0x656e63, id);
        let scale = 1.0 / math::sqrt(BUCKETS as f64);
        let projection = Matrix::from_vec(
            DEFAULT_DIM,
            BUCKETS,
            rng.normal_vec(DEFAULT_DIM * BUCKETS, scale),
        );
        HashProjectionEncoder {
            id: id.to_string(),
            projection,
            context_window: CONTEXT_WINDOW,
        }
    }

    pub fn default_backbone() -> Self {
        Self::generate(DEFAULT_ENCODER_ID)
    }

    /// Reload from exported weights (the archive layer lives in the
    /// companion crate).
    pub fn from_weights(id: &str, projection: Matrix) -> Result<Self, CoreError> {
        if projection.rows != DEFAULT_DIM || projection.cols != BUCKETS {
            return Err(CoreError::Shape(format!(
                "projection is {}x{}, expected {DEFAULT_DIM}x{BUCKETS}",
                projection.rows, projection.cols
            )));
        }
        Ok(HashProjectionEncoder {
            id: id.to_string(),
            projection,
            context_window: CONTEXT_WINDOW,
        })
    }

    pub fn projection(&self) -> &Matrix {
        &self.projection
    }

    fn bucket_feature(&self, features: &mut Vec<f64>, key: &str) {
        let h = fnv1a(key.as_bytes());
        let bucket = (h % BUCKETS as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        features[bucket] += sign;
    }

    fn project(&self, features: &[f64]) -> Embedding {
        let mut out = Matrix::zeros(1, DEFAULT_DIM);
        for (bucket, &weight) in features.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            for d in 0..DEFAULT_DIM {
                out.data[d] += weight * self.projection.get(d, bucket);
            }
        }
        Embedding::new(out.data).normalize()
    }
}

impl DualEncoder for HashProjectionEncoder {
    fn dim(&self) -> usize {
        DEFAULT_DIM
    }

    fn id(&self) -> &str {
        &self.id
    }

    fn embed_text(&self, text: &str) -> Result<TextEmbedding, CoreError> {
        let lower = text.to_lowercase();
        let tokens = split_tokens(&lower);
        if tokens.is_empty() {
            return Err(CoreError::InputMismatch(
                "cannot embed empty text".to_string(),
            ));
        }
        let truncated = tokens.len() > self.context_window;
        let tokens = &tokens[..tokens.len().min(self.context_window)];

        let mut features = alloc::vec![0.0; BUCKETS];
        for token in tokens {
            self.bucket_feature(&mut features, &format!("w:{token}"));
            let chars: Vec<char> = core::iter::once('^')
                .chain(token.chars())
                .chain(core::iter::once('$'))
                .collect();
            for tri in chars.windows(3) {
                let key: String = tri.iter().collect();
                self.bucket_feature(&mut features, &format!("c:{key}"));
            }
        }
        Ok(TextEmbedding {
            embedding: self.project(&features),
            truncated,
        })
    }

    fn embed_image(&self, image: &Raster) -> Result<Embedding, CoreError> {
        if image.width == 0 || image.height == 0 {
            return Err(CoreError::InputMismatch("empty raster".to_string()));
        }
        let mut features = alloc::vec![0.0; BUCKETS];
        for cy in 0..IMAGE_GRID {
            for cx in 0..IMAGE_GRID {
                let x0 = cx * image.width / IMAGE_GRID;
                let x1 = ((cx + 1) * image.width / IMAGE_GRID).max(x0 + 1).min(image.width);
                let y0 = cy * image.height / IMAGE_GRID;
                let y1 = ((cy + 1) * image.height / IMAGE_GRID).max(y0 + 1).min(image.height);
                if x0 >= image.width || y0 >= image.height {
                    continue;
                }
                let mut sums = [0u64; 3];
                let mut count = 0u64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let base = (y * image.width + x) * 3;
                        for c in 0..3 {
                            sums[c] += image.rgb[base + c] as u64;
                        }
                        count += 1;
                    }
                }
                for (c, sum) in sums.iter().enumerate() {
                    let mean = sum / count;
                    let level = (mean as usize * LEVELS / 256).min(LEVELS - 1);
                    let cell = cy * IMAGE_GRID + cx;
                    self.bucket_feature(&mut features, &format!("i:{cell}:{c}:{level}"));
                }
            }
        }
        Ok(self.project(&features))
    }
}
