//! Zero-shot entity retrieval: softmax over image/class-name similarity.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::encoder::{DualEncoder, Embedding};
use crate::error::CoreError;
use crate::math;
use crate::prompt::entity_queries;
use crate::tensor::{l2_normalize, Matrix};
use crate::vocab::{Entity, EntityVocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub tau: f64,
    pub k: usize,
    pub p_thres: f64,
    pub ensemble: bool,
}

impl RetrievalConfig {
    pub fn preset(name: &str) -> Option<Self> {
        let (tau, k, p_thres) = match name {
            "cross_domain" => (0.01, 3, 0.2),
            "coco" => (0.01, 3, 0.4),
            "flickr30k" => (0.01, 3, 0.3),
            "flickrstyle10k" => (0.007, 2, 0.1),
            _ => return None,
        };
        Some(RetrievalConfig {
            tau,
            k,
            p_thres,
            ensemble: false,
        })
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.tau <= 0.0 {
            return Err(CoreError::Config(alloc::format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.k < 1 {
            return Err(CoreError::Config("k must be at least 1".to_string()));
        }
        if !(0.0..=1.0).contains(&self.p_thres) {
            return Err(CoreError::Config(alloc::format!(
                "p_thres must lie in [0, 1], got {}",
                self.p_thres
            )));
        }
        Ok(())
    }
}

/// Precomputed class-name embeddings for one (vocabulary, ensemble,
/// backbone) combination; row order follows the vocabulary.
#[derive(Clone, Debug)]
pub struct VocabEmbeddings {
    names: Vec<String>,
    matrix: Matrix,
}

impl VocabEmbeddings {
    pub fn compute(
        vocab: &EntityVocabulary,
        encoder: &dyn DualEncoder,
        ensemble: bool,
    ) -> Result<Self, CoreError> {
        let dim = encoder.dim();
        let mut matrix = Matrix::zeros(vocab.len(), dim);
        for (i, name) in vocab.names().iter().enumerate() {
            let queries = entity_queries(name, ensemble)?;
            let mut mean = alloc::vec![0.0; dim];
            for q in &queries {
                let e = encoder.embed_text(q)?.embedding;
                for (m, v) in mean.iter_mut().zip(&e.values) {
                    *m += v;
                }
            }
            for m in &mut mean {
                *m /= queries.len() as f64;
            }
            l2_normalize(&mut mean);
            matrix.row_mut(i).copy_from_slice(&mean);
        }
        Ok(VocabEmbeddings {
            names: vocab.names().to_vec(),
            matrix,
        })
    }

    /// Assemble from already-embedded rows (cache loads, tests).
    pub fn from_rows(names: Vec<String>, matrix: Matrix) -> Result<Self, CoreError> {
        if names.len() != matrix.rows {
            return Err(CoreError::Shape(alloc::format!(
                "{} names but {} embedding rows",
                names.len(),
                matrix.rows
            )));
        }
        Ok(VocabEmbeddings { names, matrix })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Softmax probabilities over every vocabulary name for one image
/// embedding: p_i = exp(sim_i / tau) / sum_j exp(sim_j / tau), computed
/// with max subtraction.
pub fn entity_probabilities(
    img: &Embedding,
    vocab_emb: &VocabEmbeddings,
    tau: f64,
) -> Result<Vec<f64>, CoreError> {
    if vocab_emb.is_empty() {
        return Err(CoreError::Config(
            "entity vocabulary has no embeddings".to_string(),
        ));
    }
    if img.dim() != vocab_emb.matrix.cols {
        return Err(CoreError::Shape(alloc::format!(
            "image embedding dim {} vs vocabulary dim {}",
            img.dim(),
            vocab_emb.matrix.cols
        )));
    }
    let mut scaled: Vec<f64> = (0..vocab_emb.len())
        .map(|i| {
            let row = vocab_emb.matrix.row(i);
            let sim: f64 = row.iter().zip(&img.values).map(|(a, b)| a * b).sum();
            sim / tau
        })
        .collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in &mut scaled {
        *s = math::exp(*s - max);
        total += *s;
    }
    for s in &mut scaled {
        *s /= total;
    }
    Ok(scaled)
}

/// Entities whose probability exceeds the threshold, at most k of them,
/// sorted by descending probability with ties broken by vocabulary order.
pub fn classify_entities(
    img: &Embedding,
    vocab_emb: &VocabEmbeddings,
    cfg: &RetrievalConfig,
) -> Result<Vec<Entity>, CoreError> {
    cfg.validate()?;
    let probs = entity_probabilities(img, vocab_emb, cfg.tau)?;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .unwrap()
            .then_with(|| a.cmp(&b))
    });
    Ok(order
        .into_iter()
        .filter(|&i| probs[i] > cfg.p_thres)
        .take(cfg.k)
        .map(|i| Entity::scored(&vocab_emb.names[i], probs[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use alloc::format;
    use alloc::vec;

    fn unit(v: Vec<f64>) -> Embedding {
        Embedding::new(v).normalize()
    }

    fn vocab_from_sims(sims: &[f64]) -> (VocabEmbeddings, Embedding) {
        // 2-d construction: image along the x axis, each name at the
        // angle that realizes the requested cosine.
        let img = unit(vec![1.0, 0.0]);
        let rows: Vec<Vec<f64>> = sims
            .iter()
            .map(|&s| vec![s, math::sqrt(1.0 - s * s)])
            .collect();
        let names = (0..sims.len()).map(|i| format!("name{i}")).collect();
        let matrix = Matrix::from_rows(&rows);
        (VocabEmbeddings::from_rows(names, matrix).unwrap(), img)
    }

    #[test]
    fn equal_similarities_split_evenly() {
        let (ve, img) = vocab_from_sims(&[0.4, 0.4]);
        let probs = entity_probabilities(&img, &ve, 0.05).unwrap();
        assert!((probs[0] - 0.5).abs() < 1e-12);
        assert!((probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sharp_temperature_concentrates_mass() {
        let (ve, img) = vocab_from_sims(&[0.30, 0.20, 0.10]);
        let cfg = RetrievalConfig {
            tau: 0.01,
            k: 3,
            p_thres: 0.2,
            ensemble: false,
        };
        let out = classify_entities(&img, &ve, &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].name, "name0");
        let expected = math::exp(30.0) / (math::exp(30.0) + math::exp(20.0) + math::exp(10.0));
        assert!((out[0].score.unwrap() - expected).abs() < 1e-9);
        assert!(out[0].score.unwrap() > 0.9999);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = Stream::from_seed(3);
        let n = 1000;
        let dim = 16;
        let mut matrix = Matrix::zeros(n, dim);
        for i in 0..n {
            let mut row = rng.normal_vec(dim, 1.0);
            l2_normalize(&mut row);
            matrix.row_mut(i).copy_from_slice(&row);
        }
        let names = (0..n).map(|i| format!("n{i}")).collect();
        let ve = VocabEmbeddings::from_rows(names, matrix).unwrap();
        let img = unit(rng.normal_vec(dim, 1.0));
        let probs = entity_probabilities(&img, &ve, 0.01).unwrap();
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ties_break_by_vocabulary_order() {
        let (ve, img) = vocab_from_sims(&[0.2, 0.5, 0.5, 0.2]);
        let cfg = RetrievalConfig {
            tau: 0.1,
            k: 4,
            p_thres: 0.0,
            ensemble: false,
        };
        let out = classify_entities(&img, &ve, &cfg).unwrap();
        let names: Vec<&str> = out.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["name1", "name2", "name0", "name3"]);
    }

    #[test]
    fn k_truncates_after_thresholding() {
        let (ve, img) = vocab_from_sims(&[0.9, 0.8, 0.7, 0.6]);
        let cfg = RetrievalConfig {
            tau: 0.5,
            k: 2,
            p_thres: 0.0,
            ensemble: false,
        };
        let out = classify_entities(&img, &ve, &cfg).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].name, "name0");
        assert_eq!(out[1].name, "name1");
    }

    #[test]
    fn threshold_one_returns_nothing() {
        let (ve, img) = vocab_from_sims(&[0.9, 0.1]);
        let cfg = RetrievalConfig {
            tau: 0.01,
            k: 3,
            p_thres: 1.0,
            ensemble: false,
        };
        assert!(classify_entities(&img, &ve, &cfg).unwrap().is_empty());
    }

    #[test]
    fn monotonicity_in_threshold_and_k() {
        let (ve, img) = vocab_from_sims(&[0.35, 0.3, 0.25, 0.2, 0.15]);
        let base = RetrievalConfig {
            tau: 0.05,
            k: 5,
            p_thres: 0.0,
            ensemble: false,
        };
        let mut prev = classify_entities(&img, &ve, &base).unwrap().len();
        for thres in [0.05, 0.1, 0.3, 0.8, 1.0] {
            let cfg = RetrievalConfig { p_thres: thres, ..base };
            let n = classify_entities(&img, &ve, &cfg).unwrap().len();
            assert!(n <= prev, "raising p_thres grew the set");
            prev = n;
        }
        let mut prev = 0;
        for k in 1..=5 {
            let cfg = RetrievalConfig { k, ..base };
            let n = classify_entities(&img, &ve, &cfg).unwrap().len();
            assert!(n >= prev, "raising k shrank the set");
            prev = n;
        }
    }

    #[test]
    fn presets_match_published_settings() {
        let cd = RetrievalConfig::preset("cross_domain").unwrap();
        assert_eq!((cd.k, cd.p_thres, cd.tau), (3, 0.2, 0.01));
        let coco = RetrievalConfig::preset("coco").unwrap();
        assert_eq!((coco.k, coco.p_thres, coco.tau), (3, 0.4, 0.01));
        let flickr = RetrievalConfig::preset("flickr30k").unwrap();
        assert_eq!((flickr.k, flickr.p_thres, flickr.tau), (3, 0.3, 0.01));
        let style = RetrievalConfig::preset("flickrstyle10k").unwrap();
        assert_eq!((style.k, style.p_thres, style.tau), (2, 0.1, 0.007));
        assert!(RetrievalConfig::preset("unknown").is_none());
    }

    #[test]
    fn config_validation() {
        let ok = RetrievalConfig {
            tau: 0.01,
            k: 1,
            p_thres: 1.0,
            ensemble: false,
        };
        assert!(ok.validate().is_ok());
        assert!(RetrievalConfig { tau: 0.0, ..ok }.validate().is_err());
        assert!(RetrievalConfig { k: 0, ..ok }.validate().is_err());
        assert!(RetrievalConfig { p_thres: 1.1, ..ok }.validate().is_err());
    }

    #[test]
    fn empty_vocabulary_is_a_configuration_error() {
        let ve = VocabEmbeddings::from_rows(vec![], Matrix::zeros(0, 4)).unwrap();
        let img = unit(vec![1.0, 0.0, 0.0, 0.0]);
        let cfg = RetrievalConfig::preset("cross_domain").unwrap();
        assert!(matches!(
            classify_entities(&img, &ve, &cfg),
            Err(CoreError::Config(_))
        ));
    }

    #[test]
    fn ensemble_rows_average_query_embeddings() {
        use crate::encoder::HashProjectionEncoder;
        let enc = HashProjectionEncoder::default_backbone();
        let vocab = EntityVocabulary::from_names(["dog"], false, "t").unwrap();
        let single = VocabEmbeddings::compute(&vocab, &enc, false).unwrap();
        let ens = VocabEmbeddings::compute(&vocab, &enc, true).unwrap();
        assert_eq!(single.matrix().cols, ens.matrix().cols);
        let drift: f64 = single
            .matrix()
            .row(0)
            .iter()
            .zip(ens.matrix().row(0))
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(drift > 1e-6, "ensemble should change the embedding");
        let norm: f64 = ens.matrix().row(0).iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}
