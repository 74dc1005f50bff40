//! Sentence tokenisation and the padded sentence × word embedding grid.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_EMBEDDING_DIM: usize = 100;

pub const DEFAULT_STOPWORDS: &[&str] = &[
    "i", "me", "my", "we", "our", "you", "your", "he", "him", "his", "she", "her", "it", "its", "they", "them",
    "their", "what", "which", "who", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "do", "does", "did", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "to", "from", "in", "out", "on",
    "off", "over", "under", "then", "so", "than", "too", "very", "can", "will", "just", "not", "no",
];

pub const DEFAULT_PUNCTUATION: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

pub fn default_stopwords() -> HashSet<String> {
    DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// Splits on `.`, `!` and `?`, lowercases, strips punctuation characters,
/// removes stopwords and drops sentences left empty.
pub fn tokenize(text: &str, stopwords: &HashSet<String>, punctuation: &str) -> Vec<Vec<String>> {
    text.split(['.', '!', '?'])
        .map(|sentence| {
            sentence
                .split_whitespace()
                .map(|w| {
                    w.chars()
                        .filter(|c| !punctuation.contains(*c))
                        .flat_map(char::to_lowercase)
                        .collect::<String>()
                })
                .filter(|w| !w.is_empty() && !stopwords.contains(w))
                .collect::<Vec<_>>()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

/// Word → vector lookup.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Tensor,
}

impl EmbeddingTable {
    /// `vectors` is `V × E`, one row per entry of `words`.
    pub fn new(words: Vec<String>, vectors: Tensor) -> Result<Self> {
        if vectors.ndim() != 2 || vectors.shape()[0] != words.len() {
            return Err(Error::invalid(format!(
                "embedding table with {} words cannot use vectors of shape {:?}",
                words.len(),
                vectors.shape()
            )));
        }
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(Self { words, index, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vectors(&self) -> &Tensor {
        &self.vectors
    }

    pub fn lookup(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vectors.row(i))
    }
}

/// `S_max × W_max × E` embedding grid with a real-vs-pad mask per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct TextGrid {
    pub s_max: usize,
    pub w_max: usize,
    pub dim: usize,
    pub values: Tensor,
    pub mask: Vec<bool>,
    pub truncated_sentences: usize,
    pub truncated_words: usize,
    pub oov_tokens: usize,
}

impl TextGrid {
    pub fn empty(s_max: usize, w_max: usize, dim: usize) -> Self {
        Self {
            s_max,
            w_max,
            dim,
            values: Tensor::zeros(&[s_max, w_max, dim]),
            mask: vec![false; s_max * w_max],
            truncated_sentences: 0,
            truncated_words: 0,
            oov_tokens: 0,
        }
    }

    /// Real word count of each sentence row.
    pub fn sentence_lengths(&self) -> Vec<usize> {
        (0..self.s_max)
            .map(|s| self.mask[s * self.w_max..(s + 1) * self.w_max].iter().filter(|&&m| m).count())
            .collect()
    }

    /// Sentence rows that hold at least one real word.
    pub fn real_sentences(&self) -> Vec<usize> {
        self.sentence_lengths()
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(s, _)| s)
            .collect()
    }

    /// Sentence `s` as an `E × W_max` channels-by-position matrix.
    pub fn sentence_channels(&self, s: usize) -> Tensor {
        let (w, e) = (self.w_max, self.dim);
        let base = s * w * e;
        let mut out = vec![0.0; e * w];
        for pos in 0..w {
            for k in 0..e {
                out[k * w + pos] = self.values.data()[base + pos * e + k];
            }
        }
        Tensor::new(vec![e, w], out).expect("sentence shape")
    }

    /// Copy with `n` extra all-pad sentence rows appended.
    pub fn with_padding_sentences(&self, n: usize) -> Self {
        let s_max = self.s_max + n;
        let mut data = self.values.data().to_vec();
        data.resize(s_max * self.w_max * self.dim, 0.0);
        let mut mask = self.mask.clone();
        mask.resize(s_max * self.w_max, false);
        Self {
            s_max,
            values: Tensor::new(vec![s_max, self.w_max, self.dim], data).expect("grid shape"),
            mask,
            ..self.clone()
        }
    }
}

/// Lays tokenised sentences into a fixed grid. Unknown words become zero
/// vectors (still marked real); sentences and words beyond the grid are
/// truncated and counted.
pub fn embed_text(sentences: &[Vec<String>], table: &EmbeddingTable, s_max: usize, w_max: usize) -> TextGrid {
    let dim = table.dim();
    let mut grid = TextGrid::empty(s_max, w_max, dim);
    grid.truncated_sentences = sentences.len().saturating_sub(s_max);
    let data = grid.values.data_mut();
    for (s, sentence) in sentences.iter().take(s_max).enumerate() {
        grid.truncated_words += sentence.len().saturating_sub(w_max);
        for (w, word) in sentence.iter().take(w_max).enumerate() {
            grid.mask[s * w_max + w] = true;
            match table.lookup(word) {
                Some(v) => {
                    let base = (s * w_max + w) * dim;
                    data[base..base + dim].copy_from_slice(v);
                }
                None => grid.oov_tokens += 1,
            }
        }
    }
    grid
}
