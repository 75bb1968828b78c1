//! Okapi BM25 over [`Document`]s.
//!
//! score(q, d) = Σ_t idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·dl/avgdl))
//! idf(t)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//!
//! The `+1` inside the logarithm keeps idf positive even for terms present in
//! most documents. Query terms are de-duplicated and summed in sorted order,
//! so the posting-list path used by [`Bm25Index::search`] and the per-document
//! path of [`Bm25Index::score`] produce bit-identical scores.

use super::{index_term_split, Document, RetrievalError, SearchHit};
use crate::exec::Execution;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    documents: Vec<Document>,
    doc_lengths: Vec<usize>,
    avg_doc_length: f64,
    term_frequencies: Vec<HashMap<String, u32>>,
    document_frequencies: HashMap<String, u32>,
    postings: HashMap<String, Vec<(u32, u32)>>,
    by_id: HashMap<String, usize>,
}

impl Bm25Index {
    pub fn build(documents: Vec<Document>, params: Bm25Params, exec: Execution) -> Self {
        let term_frequencies: Vec<HashMap<String, u32>> = exec.map(&documents, |doc| {
            let mut tf = HashMap::new();
            for term in index_term_split(&doc.text) {
                *tf.entry(term).or_insert(0) += 1;
            }
            tf
        });
        let doc_lengths: Vec<usize> = term_frequencies
            .iter()
            .map(|tf| tf.values().map(|&c| c as usize).sum())
            .collect();
        let avg_doc_length = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().sum::<usize>() as f64 / doc_lengths.len() as f64
        };

        let mut document_frequencies: HashMap<String, u32> = HashMap::new();
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        for (i, tf) in term_frequencies.iter().enumerate() {
            for (term, &count) in tf {
                *document_frequencies.entry(term.clone()).or_insert(0) += 1;
                postings
                    .entry(term.clone())
                    .or_default()
                    .push((i as u32, count));
            }
        }
        let by_id = documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i))
            .collect();

        Bm25Index {
            params,
            documents,
            doc_lengths,
            avg_doc_length,
            term_frequencies,
            document_frequencies,
            postings,
            by_id,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<usize> {
        self.by_id.get(doc_id).map(|&i| self.doc_lengths[i])
    }

    pub fn document_frequency(&self, term: &str) -> u32 {
        self.document_frequencies.get(term).copied().unwrap_or(0)
    }

    pub fn term_frequency(&self, doc_id: &str, term: &str) -> Option<u32> {
        self.by_id
            .get(doc_id)
            .map(|&i| self.term_frequencies[i].get(term).copied().unwrap_or(0))
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.documents[i])
    }

    /// `None` for terms absent from the corpus.
    pub fn idf(&self, term: &str) -> Option<f64> {
        let df = *self.document_frequencies.get(term)? as f64;
        let n = self.documents.len() as f64;
        Some((1.0 + (n - df + 0.5) / (df + 0.5)).ln())
    }

    fn term_weight(&self, idf: f64, tf: u32, doc_len: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = 1.0 - b + b * doc_len as f64 / self.avg_doc_length;
        idf * tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    fn distinct_terms(query_terms: &[String]) -> BTreeSet<&str> {
        query_terms.iter().map(String::as_str).collect()
    }

    /// Score of one document for already-split query terms.
    pub fn score(&self, query_terms: &[String], doc_id: &str) -> Result<f64, RetrievalError> {
        let &i = self
            .by_id
            .get(doc_id)
            .ok_or_else(|| RetrievalError::UnknownDocument(doc_id.to_string()))?;
        let tf = &self.term_frequencies[i];
        let mut score = 0.0;
        for term in Self::distinct_terms(query_terms) {
            if let (Some(idf), Some(&count)) = (self.idf(term), tf.get(term)) {
                score += self.term_weight(idf, count, self.doc_lengths[i]);
            }
        }
        Ok(score)
    }

    /// Scores every document through the posting lists; zero for non-matches.
    pub fn score_all(&self, query_terms: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.documents.len()];
        for term in Self::distinct_terms(query_terms) {
            let (Some(idf), Some(list)) = (self.idf(term), self.postings.get(term)) else {
                continue;
            };
            for &(doc, count) in list {
                let doc = doc as usize;
                scores[doc] += self.term_weight(idf, count, self.doc_lengths[doc]);
            }
        }
        scores
    }

    /// Documents ranked by score, descending; ties by `doc_id` ascending.
    /// Documents scoring zero are dropped.
    pub fn ranked(&self, query: &str) -> Vec<(usize, f64)> {
        let terms = index_term_split(query);
        let mut ranked: Vec<(usize, f64)> = self
            .score_all(&terms)
            .into_iter()
            .enumerate()
            .filter(|&(_, s)| s > 0.0)
            .collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.documents[a.0].doc_id.cmp(&self.documents[b.0].doc_id))
        });
        ranked
    }

    pub fn search(&self, query: &str, top_k: usize) -> Vec<SearchHit> {
        self.ranked(query)
            .into_iter()
            .take(top_k)
            .map(|(i, score)| {
                let doc = &self.documents[i];
                SearchHit {
                    file: doc.file.clone(),
                    span: doc.span,
                    snippet: doc.text.clone(),
                    score: Some(score),
                    provenance: "search_bm25".to_string(),
                }
            })
            .collect()
    }
}
