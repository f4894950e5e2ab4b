//! Deterministic text embeddings and cosine similarity.
//!
//! The [`HashingEmbedder`] is the offline fallback behind the embedding
//! provider abstraction: a feature-hashed unigram+bigram bag-of-words.
//! Tokens are lowercased alphanumeric runs; each unigram and each adjacent
//! bigram is hashed with 64-bit FNV-1a into one of `dim` buckets, bucket
//! counts are accumulated, and the count vector is L2-normalized. The
//! scheme has no model weights and no I/O, so embeddings are a pure
//! function of the input text and the configured dimension.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default embedding dimensionality for the hashing scheme.
pub const DEFAULT_EMBED_DIM: usize = 256;

/// Errors from embedding text or comparing vectors.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbedError {
    /// The text contained no alphanumeric tokens after normalization.
    #[error("text has no embeddable tokens after normalization")]
    EmptyText,
    /// Cosine was asked to compare vectors of different dimensions.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Anything that can turn text into a unit vector of fixed dimension.
pub trait Embedder {
    /// Embedding dimensionality; every returned vector has this length.
    fn dim(&self) -> usize;

    /// Embeds `text` into a unit vector (L2 norm 1 within 1e-6).
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Feature-hashing bag-of-words embedder (unigrams + bigrams, FNV-1a).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HashingEmbedder {
    dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBED_DIM)
    }
}

impl HashingEmbedder {
    /// Creates an embedder with `dim` hash buckets.
    ///
    /// # Panics
    /// Panics if `dim` is zero.
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut counts = vec![0.0f64; self.dim];
        for token in &tokens {
            counts[bucket(token, self.dim)] += 1.0;
        }
        for pair in tokens.windows(2) {
            let bigram = format!("{} {}", pair[0], pair[1]);
            counts[bucket(&bigram, self.dim)] += 1.0;
        }
        normalize(&mut counts);
        Ok(counts)
    }
}

/// Splits text into lowercase alphanumeric tokens.
///
/// Any maximal run of ASCII-alphanumeric characters is one token; all
/// other characters (punctuation, whitespace, unicode symbols) act as
/// separators. CamelCase is *not* split: the scheme treats identifiers
/// as opaque words, which keeps it trivially reimplementable by oracles.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_ascii_lowercase())
        .collect()
}

/// 64-bit FNV-1a hash of `s`, reduced to a bucket index modulo `dim`.
fn bucket(s: &str, dim: usize) -> usize {
    (fnv1a64(s.as_bytes()) % dim as u64) as usize
}

/// 64-bit FNV-1a over raw bytes (offset basis 14695981039346656037,
/// prime 1099511628211).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Scales `v` in place to unit L2 norm. Leaves the zero vector untouched.
pub fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Raw cosine similarity in [-1, 1].
///
/// Assumes nothing about normalization; divides by both norms. Returns an
/// error on dimension mismatch and 0.0 if either vector is all-zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    if a.len() != b.len() {
        return Err(EmbedError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine clamped to [0, 1] — the similarity-matrix entry rule.
///
/// Negative cosines carry no shared-functionality signal, and the
/// clustering objective requires non-negative edge weights.
pub fn clamped_cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbedError> {
    Ok(cosine(a, b)?.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_ulps_eq;

    #[test]
    fn identical_text_gives_cosine_one() {
        let e = HashingEmbedder::default();
        let a = e.embed("alpha beta").unwrap();
        let b = e.embed("alpha beta").unwrap();
        assert_ulps_eq!(cosine(&a, &b).unwrap(), 1.0, max_ulps = 4);
    }

    #[test]
    fn embeddings_are_unit_vectors() {
        let e = HashingEmbedder::default();
        for text in ["x", "alpha beta gamma", "Parse the repository graph."] {
            let v = e.embed(text).unwrap();
            assert_eq!(v.len(), DEFAULT_EMBED_DIM);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6, "norm {norm} for {text:?}");
        }
    }

    #[test]
    fn empty_after_normalization_is_an_error() {
        let e = HashingEmbedder::default();
        assert_eq!(e.embed(""), Err(EmbedError::EmptyText));
        assert_eq!(e.embed("  ...  !!"), Err(EmbedError::EmptyText));
    }

    #[test]
    fn tokenizer_lowercases_and_splits_on_non_alphanumerics() {
        assert_eq!(
            tokenize("Parse-the_repo2 Graph!"),
            vec!["parse", "the", "repo2", "graph"]
        );
        assert_eq!(tokenize("a.b.C"), vec!["a", "b", "c"]);
    }

    #[test]
    fn cosine_dimension_mismatch_is_an_error() {
        assert_eq!(
            cosine(&[1.0, 0.0], &[1.0]),
            Err(EmbedError::DimensionMismatch { left: 2, right: 1 })
        );
    }

    #[test]
    fn antipodal_vectors_clamp_to_zero() {
        let a = [1.0, 0.0];
        let b = [-1.0, 0.0];
        assert_ulps_eq!(cosine(&a, &b).unwrap(), -1.0, max_ulps = 4);
        assert_ulps_eq!(clamped_cosine(&a, &b).unwrap(), 0.0, max_ulps = 4);
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn disjoint_unigrams_share_no_buckets_unless_hash_collides() {
        // "alpha" vs "zulu": cosine equals the oracle value recomputed in
        // the integration suite; here we only pin determinism and range.
        let e = HashingEmbedder::default();
        let a = e.embed("alpha").unwrap();
        let z = e.embed("zulu").unwrap();
        let c = cosine(&a, &z).unwrap();
        assert!((0.0..=1.0).contains(&c));
        let c2 = cosine(
            &e.embed("alpha").unwrap(),
            &e.embed("zulu").unwrap(),
        )
        .unwrap();
        assert_ulps_eq!(c, c2, max_ulps = 4);
    }
}
