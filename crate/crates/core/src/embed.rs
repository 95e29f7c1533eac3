//! Token embeddings: pretrained text vectors plus deterministic OOV vectors.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::Token;
use crate::error::{Error, Result};
use crate::neural::Tensor;
use crate::rng::{fnv1a64, mix64, SplitMix64};

/// Immutable token → vector table.
///
/// Lookup tries the lowercased token, then the raw token. Misses get an OOV
/// vector derived from the lowercased text: a [`SplitMix64`] stream seeded
/// with `mix64(oov_seed) ^ fnv1a64(lowercase(token))`, one draw per
/// component, mapped to `[-0.5, 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    oov_seed: u64,
}

impl EmbeddingTable {
    /// Table with no stored vectors: every token gets its OOV vector.
    pub fn hashed(dim: usize, oov_seed: u64) -> Self {
        Self {
            dim,
            index: HashMap::new(),
            vectors: Vec::new(),
            oov_seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn oov_seed(&self) -> u64 {
        self.oov_seed
    }

    /// Insert unless present (first wins).
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> bool {
        assert_eq!(vector.len(), self.dim);
        if self.index.contains_key(token) {
            return false;
        }
        self.index.insert(token.to_string(), self.index.len());
        self.vectors.extend_from_slice(vector);
        true
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    pub fn oov_vector(&self, token: &str) -> Vec<f64> {
        let key = fnv1a64(token.to_lowercase().as_bytes());
        let mut rng = SplitMix64::new(mix64(self.oov_seed) ^ key);
        (0..self.dim).map(|_| rng.next_f64() - 0.5).collect()
    }

    pub fn lookup_into(&self, token: &str, out: &mut [f64]) {
        let lower = token.to_lowercase();
        match self.get(&lower).or_else(|| self.get(token)) {
            Some(v) => out.copy_from_slice(v),
            None => out.copy_from_slice(&self.oov_vector(token)),
        }
    }

    /// `L × dim` matrix, one row per token.
    pub fn embed_tokens(&self, tokens: &[Token]) -> Tensor {
        self.embed_words(tokens.iter().map(|t| t.text.as_str()))
    }

    pub fn embed_words<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> Tensor {
        let words: Vec<&str> = words.into_iter().collect();
        let mut t = Tensor::zeros(&[words.len(), self.dim]);
        for (i, w) in words.iter().enumerate() {
            self.lookup_into(w, t.row_mut(i));
        }
        t
    }
}

/// Load a text embedding file: `token f1 ... f_dim` per line, single spaces.
pub fn load_embedding_file(path: &Path, expected_dim: usize, oov_seed: u64) -> Result<EmbeddingTable> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
            hint: "embedding file not found".into(),
        });
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table = EmbeddingTable::hashed(expected_dim, oov_seed);
    let mut buf = vec![0.0; expected_dim];
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Embedding {
            path: path.to_path_buf(),
            line: n + 1,
            message,
        };
        let mut fields = line.split(' ');
        let token = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        if values.len() != expected_dim {
            return Err(err(format!("expected {expected_dim} values, found {}", values.len())));
        }
        for (slot, v) in buf.iter_mut().zip(&values) {
            *slot = v.parse().map_err(|_| err(format!("not a number: `{v}`")))?;
        }
        table.insert(token, &buf);
    }
    Ok(table)
}
