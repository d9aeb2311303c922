//! NPMI-weighted vocabulary graph over sliding-window co-occurrence counts.
//!
//! One node per unique token; an undirected edge joins two tokens when their
//! normalized pointwise mutual information is positive. Probabilities are
//! window frequencies: a window of fixed size slides over each document's
//! token stream with stride one, and a token or pair is counted at most once
//! per window no matter how often it repeats inside. Windows never span
//! documents; a document shorter than the window contributes exactly one
//! window (its whole stream).
//!
//! All logarithms are natural. The base cancels inside NPMI; raw PMI values
//! fix ln so they are comparable across runs.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use thiserror::Error;

use crate::matrix::DenseMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("window size must be at least 2, got {got}")]
    WindowTooSmall { got: usize },
    #[error("tokens `{x}` and `{y}` never co-occur in a window")]
    ZeroCooccurrence { x: String, y: String },
    #[error("graph text line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("invalid edge ({i}, {j}) weight {weight}: {reason}")]
    InvalidEdge { i: usize, j: usize, weight: f64, reason: String },
}

/// Token-to-node index map. Indices are dense, 0-based, and assigned in
/// lexicographic token order, so the same token set always yields the same
/// numbering.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Builds from any token iterator; duplicates collapse.
    pub fn from_tokens<I: IntoIterator<Item = S>, S: Into<String>>(iter: I) -> Self {
        let mut index: BTreeMap<String, usize> = iter.into_iter().map(|t| (t.into(), 0)).collect();
        let mut tokens = Vec::with_capacity(index.len());
        for (i, (token, slot)) in index.iter_mut().enumerate() {
            *slot = i;
            tokens.push(token.clone());
        }
        Vocabulary { index, tokens }
    }

    pub fn from_docs(docs: &[Vec<String>]) -> Self {
        Vocabulary::from_tokens(docs.iter().flatten().cloned())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Token at `i`; panics when out of range.
    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    /// `(token, index)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i))
    }
}

/// Sliding-window presence counts over a tokenized corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WindowCounts {
    pub window_size: usize,
    /// Total number of windows across all documents.
    pub total_windows: u64,
    token_windows: HashMap<String, u64>,
    pair_windows: HashMap<(String, String), u64>,
}

impl WindowCounts {
    fn new(window_size: usize) -> Self {
        WindowCounts { window_size, ..WindowCounts::default() }
    }

    /// Windows containing `token` at least once.
    pub fn token_count(&self, token: &str) -> u64 {
        self.token_windows.get(token).copied().unwrap_or(0)
    }

    /// Windows containing both tokens at least once; symmetric.
    pub fn pair_count(&self, x: &str, y: &str) -> u64 {
        self.pair_windows.get(&pair_key(x, y)).copied().unwrap_or(0)
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&str, u64)> {
        self.token_windows.iter().map(|(t, &c)| (t.as_str(), c))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.pair_windows.iter().map(|((x, y), &c)| (x.as_str(), y.as_str(), c))
    }

    /// Commutative aggregation; used by the parallel counter.
    #[cfg(feature = "parallel")]
    fn absorb(&mut self, other: WindowCounts) {
        debug_assert_eq!(self.window_size, other.window_size);
        self.total_windows += other.total_windows;
        for (t, c) in other.token_windows {
            *self.token_windows.entry(t).or_default() += c;
        }
        for (p, c) in other.pair_windows {
            *self.pair_windows.entry(p).or_default() += c;
        }
    }
}

fn pair_key(x: &str, y: &str) -> (String, String) {
    if x <= y {
        (x.to_string(), y.to_string())
    } else {
        (y.to_string(), x.to_string())
    }
}

/// Counts sliding windows over each document. Dispatches to the
/// per-document-parallel form under the `parallel` feature; aggregation is
/// commutative, so both forms agree exactly.
pub fn count_windows(docs: &[Vec<String>], window_size: usize) -> Result<WindowCounts, GraphError> {
    #[cfg(feature = "parallel")]
    return count_windows_par(docs, window_size);
    #[cfg(not(feature = "parallel"))]
    count_windows_seq(docs, window_size)
}

/// Sequential [`count_windows`].
pub fn count_windows_seq(
    docs: &[Vec<String>],
    window_size: usize,
) -> Result<WindowCounts, GraphError> {
    if window_size < 2 {
        return Err(GraphError::WindowTooSmall { got: window_size });
    }
    let mut counts = WindowCounts::new(window_size);
    for doc in docs {
        count_document(doc, &mut counts);
    }
    Ok(counts)
}

/// Per-document-parallel [`count_windows`].
#[cfg(feature = "parallel")]
pub fn count_windows_par(
    docs: &[Vec<String>],
    window_size: usize,
) -> Result<WindowCounts, GraphError> {
    use rayon::prelude::*;
    if window_size < 2 {
        return Err(GraphError::WindowTooSmall { got: window_size });
    }
    Ok(docs
        .par_iter()
        .fold(
            || WindowCounts::new(window_size),
            |mut counts, doc| {
                count_document(doc, &mut counts);
                counts
            },
        )
        .reduce(
            || WindowCounts::new(window_size),
            |mut a, b| {
                a.absorb(b);
                a
            },
        ))
}

fn count_document(doc: &[String], counts: &mut WindowCounts) {
    let w = counts.window_size;
    let windows = if doc.len() <= w { 1 } else { doc.len() - w + 1 };
    counts.total_windows += windows as u64;
    let mut distinct: Vec<&str> = Vec::with_capacity(w);
    for start in 0..windows {
        let window = &doc[start..(start + w).min(doc.len())];
        distinct.clear();
        distinct.extend(window.iter().map(String::as_str));
        distinct.sort_unstable();
        distinct.dedup();
        for (i, x) in distinct.iter().enumerate() {
            *counts.token_windows.entry(x.to_string()).or_default() += 1;
            for y in &distinct[i + 1..] {
                // Keys are built sorted, so this is already normalized.
                *counts.pair_windows.entry((x.to_string(), y.to_string())).or_default() += 1;
            }
        }
    }
}

/// Pointwise mutual information and its normalized form for a token pair.
///
/// `pmi = ln(P(x,y) / (P(x) P(y)))` and `npmi = pmi / -ln P(x,y)`, with all
/// probabilities estimated as window frequencies. A pair present in every
/// window has `-ln P(x,y) = 0`; that degenerate case returns `(0, 0)`,
/// treating total co-occurrence as carrying no discriminative signal.
pub fn npmi(counts: &WindowCounts, x: &str, y: &str) -> Result<(f64, f64), GraphError> {
    let joint = counts.pair_count(x, y);
    if joint == 0 {
        return Err(GraphError::ZeroCooccurrence { x: x.into(), y: y.into() });
    }
    let total = counts.total_windows as f64;
    let p_xy = joint as f64 / total;
    if p_xy >= 1.0 {
        return Ok((0.0, 0.0));
    }
    let p_x = counts.token_count(x) as f64 / total;
    let p_y = counts.token_count(y) as f64 / total;
    let pmi = (p_xy / (p_x * p_y)).ln();
    // The quotient lies in [-1, 1] mathematically, but the two logarithms
    // round independently and can push it past 1 by an ulp when
    // p_x = p_y = p_xy. Clamping keeps edge weights in their range.
    Ok((pmi, (pmi / -p_xy.ln()).clamp(-1.0, 1.0)))
}

/// Vocabulary graph: nodes are the counted tokens, edges the positive-NPMI
/// pairs. Off-diagonal weights lie in `(0, 1]`; every node additionally
/// carries an implicit unit self-loop, which keeps the degree matrix
/// invertible for normalization.
#[derive(Debug)]
pub struct VocabGraph {
    vocab: Vocabulary,
    /// Keyed `(i, j)` with `i < j`; symmetric by construction.
    edges: BTreeMap<(usize, usize), f64>,
    pub window_size: usize,
    normalized: OnceLock<DenseMatrix>,
}

impl Clone for VocabGraph {
    fn clone(&self) -> Self {
        let normalized = OnceLock::new();
        if let Some(m) = self.normalized.get() {
            let _ = normalized.set(m.clone());
        }
        VocabGraph {
            vocab: self.vocab.clone(),
            edges: self.edges.clone(),
            window_size: self.window_size,
            normalized,
        }
    }
}

impl PartialEq for VocabGraph {
    fn eq(&self, other: &Self) -> bool {
        // The cache is derived state and excluded deliberately.
        self.vocab == other.vocab
            && self.edges == other.edges
            && self.window_size == other.window_size
    }
}

impl VocabGraph {
    /// Builds a graph from validated parts; `edges` must use `i < j` node
    /// indices inside the vocabulary with weights in `(0, 1]`.
    pub fn from_parts(
        vocab: Vocabulary,
        edges: BTreeMap<(usize, usize), f64>,
        window_size: usize,
    ) -> Result<Self, GraphError> {
        for (&(i, j), &w) in &edges {
            let reason = if i >= j {
                Some("indices must satisfy i < j")
            } else if j >= vocab.len() {
                Some("index out of vocabulary range")
            } else if !(w > 0.0 && w <= 1.0) {
                Some("weight must lie in (0, 1]")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(GraphError::InvalidEdge { i, j, weight: w, reason: reason.into() });
            }
        }
        Ok(VocabGraph { vocab, edges, window_size, normalized: OnceLock::new() })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn node_count(&self) -> usize {
        self.vocab.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in `(i, j)` order with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return (i < self.vocab.len()).then_some(1.0);
        }
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.get(&key).copied()
    }

    /// Dense adjacency with the unit diagonal included.
    pub fn adjacency(&self) -> DenseMatrix {
        let v = self.vocab.len();
        let mut a = DenseMatrix::identity(v);
        for (&(i, j), &w) in &self.edges {
            a.set(i, j, w);
            a.set(j, i, w);
        }
        a
    }

    /// Symmetrically normalized adjacency, computed once and cached.
    pub fn normalized(&self) -> &DenseMatrix {
        self.normalized.get_or_init(|| normalize_adjacency(self))
    }
}

/// Builds the graph for a set of counts: one node per counted token, an edge
/// wherever NPMI is positive.
///
/// Iteration runs over the sorted pair set, so the result is independent of
/// hash order and of the order pairs were counted in.
pub fn build_graph(counts: &WindowCounts) -> VocabGraph {
    let vocab = Vocabulary::from_tokens(counts.tokens().map(|(t, _)| t.to_string()));
    let mut edges = BTreeMap::new();
    for (x, y, _) in counts.pairs() {
        let (_, npmi_value) = npmi(counts, x, y).expect("counted pair has nonzero co-occurrence");
        if npmi_value > 0.0 {
            let (i, j) = (
                vocab.index_of(x).expect("counted token is in vocabulary"),
                vocab.index_of(y).expect("counted token is in vocabulary"),
            );
            edges.insert((i.min(j), i.max(j)), npmi_value);
        }
    }
    VocabGraph { vocab, edges, window_size: counts.window_size, normalized: OnceLock::new() }
}

/// `D^(-1/2) A D^(-1/2)` with `A` the adjacency including its unit diagonal
/// and `D` the diagonal of row sums. Every node has degree >= 1 from the
/// self-loop, so the inverse square roots always exist.
pub fn normalize_adjacency(graph: &VocabGraph) -> DenseMatrix {
    let a = graph.adjacency();
    let v = a.rows();
    let inv_sqrt: Vec<f64> = (0..v)
        .map(|i| {
            let degree: f64 = a.row(i).iter().sum();
            1.0 / degree.sqrt()
        })
        .collect();
    let mut out = DenseMatrix::zeros(v, v);
    for i in 0..v {
        for j in 0..v {
            out.set(i, j, inv_sqrt[i] * a.get(i, j) * inv_sqrt[j]);
        }
    }
    out
}

/// Serializes a graph: header `V E window_size`, then `token index` lines in
/// index order, then `i j weight` lines in `(i, j)` order with 17
/// significant digits.
pub fn emit_graph(graph: &VocabGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", graph.node_count(), graph.edge_count(), graph.window_size);
    for (token, i) in graph.vocab.iter() {
        let _ = writeln!(out, "{token} {i}");
    }
    for (i, j, w) in graph.edges() {
        let _ = writeln!(out, "{i} {j} {w:.16e}");
    }
    out
}

/// Parses the [`emit_graph`] format.
pub fn parse_graph(content: &str) -> Result<VocabGraph, GraphError> {
    let malformed = |line: usize, reason: String| GraphError::Malformed { line, reason };
    let mut lines = content.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| malformed(1, "missing header".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let [v, e, w] = parts.as_slice() else {
        return Err(malformed(1, "header must be `V E window_size`".into()));
    };
    let parse_count = |s: &str, line: usize| {
        s.parse::<usize>().map_err(|_| malformed(line, format!("bad count `{s}`")))
    };
    let (v, e, window_size) = (parse_count(v, 1)?, parse_count(e, 1)?, parse_count(w, 1)?);

    let mut tokens = Vec::with_capacity(v);
    for expected in 0..v {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| malformed(expected + 2, format!("expected {v} token lines")))?;
        let (token, index) = line
            .rsplit_once(' ')
            .ok_or_else(|| malformed(idx + 1, "token line must be `token index`".into()))?;
        let index = parse_count(index, idx + 1)?;
        if index != expected {
            return Err(malformed(idx + 1, format!("expected index {expected}, got {index}")));
        }
        if token.is_empty() || token.contains(char::is_whitespace) {
            return Err(malformed(idx + 1, format!("invalid token `{token}`")));
        }
        tokens.push(token.to_string());
    }
    if tokens.windows(2).any(|pair| pair[0] >= pair[1]) {
        return Err(malformed(2, "tokens must be strictly increasing lexicographically".into()));
    }
    let vocab = Vocabulary::from_tokens(tokens);

    let mut edges = BTreeMap::new();
    for done in 0..e {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| malformed(v + done + 2, format!("expected {e} edge lines")))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [i, j, weight] = parts.as_slice() else {
            return Err(malformed(idx + 1, "edge line must be `i j weight`".into()));
        };
        let (i, j) = (parse_count(i, idx + 1)?, parse_count(j, idx + 1)?);
        let weight = weight
            .parse::<f64>()
            .map_err(|_| malformed(idx + 1, format!("bad weight `{weight}`")))?;
        if edges.insert((i, j), weight).is_some() {
            return Err(malformed(idx + 1, format!("duplicate edge ({i}, {j})")));
        }
    }
    if let Some((idx, line)) = lines.next() {
        if !line.trim().is_empty() {
            return Err(malformed(idx + 1, "trailing content after final edge".into()));
        }
    }
    VocabGraph::from_parts(vocab, edges, window_size)
}

/// Serializes a vocabulary: one token per line, line k (1-based) holding the
/// token with index k-1.
pub fn emit_vocabulary(vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for (token, _) in vocab.iter() {
        out.push_str(token);
        out.push('\n');
    }
    out
}

/// Parses the [`emit_vocabulary`] format. Input order is irrelevant: indices
/// are always reassigned lexicographically.
pub fn parse_vocabulary(content: &str) -> Vocabulary {
    Vocabulary::from_tokens(content.lines().map(str::trim).filter(|l| !l.is_empty()))
}
