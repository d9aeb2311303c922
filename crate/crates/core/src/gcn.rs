//! Graph convolution: single layer, two-layer form with ReLU, analytic
//! gradients, and the feature/embedding plumbing around them.
//!
//! The two-layer form is `ReLU(X Ã W_vh) W_hc` for a batch `X` of m rows
//! over a v-node vocabulary graph with normalized adjacency `Ã` (v by v),
//! hidden width h, and output width c. There are no biases and no dropout;
//! the ReLU subgradient at exactly 0 is taken to be 0 so gradients are
//! reproducible.
//!
//! Matrices are dense. The vocabulary graphs this crate targets are
//! desk-scale (a few thousand nodes at most); densifying `Ã` keeps the
//! kernels simple and bit-reproducible.

use thiserror::Error;

use crate::graph::Vocabulary;
use crate::matrix::{DenseMatrix, MatrixError};
use crate::text::UNKNOWN_TOKEN;

#[derive(Debug, Error, PartialEq)]
pub enum GcnError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("adjacency must be square, got {rows}x{cols}")]
    NonSquareAdjacency { rows: usize, cols: usize },
    #[error("embedding width must be at least 1")]
    ZeroEmbeddingWidth,
    #[error("embeddings tsv line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Weights of the two-layer graph convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct VgcnParams {
    /// v x h, vocabulary to hidden.
    pub w_vh: DenseMatrix,
    /// h x c, hidden to output.
    pub w_hc: DenseMatrix,
}

impl VgcnParams {
    pub fn hidden_size(&self) -> usize {
        self.w_vh.cols()
    }

    pub fn output_size(&self) -> usize {
        self.w_hc.cols()
    }
}

fn require_square(a: &DenseMatrix) -> Result<(), GcnError> {
    if a.rows() != a.cols() {
        return Err(GcnError::NonSquareAdjacency { rows: a.rows(), cols: a.cols() });
    }
    Ok(())
}

/// One graph convolution: `Ã X W` for node features `X` (n x m) and weights
/// `W` (m x h) over an n-node graph.
pub fn gcn_layer(
    a_norm: &DenseMatrix,
    x: &DenseMatrix,
    w: &DenseMatrix,
) -> Result<DenseMatrix, GcnError> {
    require_square(a_norm)?;
    Ok(a_norm.matmul(x)?.matmul(w)?)
}

/// Two-layer convolution over a batch: `ReLU(X Ã W_vh) W_hc`, m x c.
///
/// The batch matrix multiplies the adjacency from the left (`X` is m x v, so
/// each row mixes vocabulary counts through `Ã` before hitting the weights).
pub fn vgcn_forward(
    x_mv: &DenseMatrix,
    a_norm: &DenseMatrix,
    params: &VgcnParams,
) -> Result<DenseMatrix, GcnError> {
    require_square(a_norm)?;
    let pre = x_mv.matmul(a_norm)?.matmul(&params.w_vh)?;
    Ok(pre.map(|v| v.max(0.0)).matmul(&params.w_hc)?)
}

/// Gradients of `sum(upstream . output)` with respect to both weight
/// matrices, where `output = vgcn_forward(x, a, params)` and `.` is the
/// element-wise product. Returns `(grad_w_vh, grad_w_hc)`.
pub fn vgcn_gradients(
    x_mv: &DenseMatrix,
    a_norm: &DenseMatrix,
    params: &VgcnParams,
    upstream: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix), GcnError> {
    require_square(a_norm)?;
    let z = x_mv.matmul(a_norm)?; // m x v
    let pre = z.matmul(&params.w_vh)?; // m x h
    let hidden = pre.map(|v| v.max(0.0)); // m x h

    if upstream.shape() != (x_mv.rows(), params.output_size()) {
        return Err(GcnError::Matrix(MatrixError::DimensionMismatch {
            op: "vgcn_gradients upstream",
            lhs_rows: x_mv.rows(),
            lhs_cols: params.output_size(),
            rhs_rows: upstream.rows(),
            rhs_cols: upstream.cols(),
        }));
    }

    let grad_w_hc = hidden.transpose().matmul(upstream)?; // h x c
    // ReLU gate: strictly positive pre-activations pass gradient through.
    let d_pre = upstream
        .matmul(&params.w_hc.transpose())?
        .zip_map(&pre, |g, p| if p > 0.0 { g } else { 0.0 })?; // m x h
    let grad_w_vh = z.transpose().matmul(&d_pre)?; // v x h
    Ok((grad_w_vh, grad_w_hc))
}

/// Token-count features for one tokenized sentence: a 1 x v row where entry
/// i counts occurrences of vocabulary token i. [`UNKNOWN_TOKEN`] and any
/// token outside the vocabulary contribute nothing.
pub fn build_sentence_features(tokens: &[String], vocab: &Vocabulary) -> DenseMatrix {
    let mut row = DenseMatrix::zeros(1, vocab.len());
    for token in tokens {
        if token == UNKNOWN_TOKEN {
            continue;
        }
        if let Some(i) = vocab.index_of(token) {
            row.set(0, i, row.get(0, i) + 1.0);
        }
    }
    row
}

/// Batch of sentence features, one row per sentence.
pub fn build_batch_features(sentences: &[Vec<String>], vocab: &Vocabulary) -> DenseMatrix {
    let mut x = DenseMatrix::zeros(sentences.len(), vocab.len());
    for (r, tokens) in sentences.iter().enumerate() {
        let row = build_sentence_features(tokens, vocab);
        for c in 0..vocab.len() {
            x.set(r, c, row.get(0, c));
        }
    }
    x
}

/// Prepends a graph embedding (1 x c) to a token-embedding sequence (t x d)
/// as extra sequence positions: the embedding is laid out row-major into
/// ceil(c/d) rows of width d, zero-padded at the tail, and the token rows
/// follow unchanged. Requires `d >= 1`.
pub fn concat_embeddings(
    graph_emb: &DenseMatrix,
    token_embs: &DenseMatrix,
) -> Result<DenseMatrix, GcnError> {
    let d = token_embs.cols();
    if d == 0 {
        return Err(GcnError::ZeroEmbeddingWidth);
    }
    let c = graph_emb.cols();
    let extra = c.div_ceil(d);
    let mut out = DenseMatrix::zeros(token_embs.rows() + extra, d);
    for k in 0..c {
        out.set(k / d, k % d, graph_emb.get(0, k));
    }
    for r in 0..token_embs.rows() {
        for col in 0..d {
            out.set(extra + r, col, token_embs.get(r, col));
        }
    }
    Ok(out)
}

/// Serializes per-instance graph embeddings as TSV lines
/// `instance_id TAB c TAB v1 TAB v2 ...` with 17 significant digits.
pub fn emit_embeddings_tsv(entries: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    for (id, values) in entries {
        out.push_str(id);
        out.push('\t');
        out.push_str(&values.len().to_string());
        for v in values {
            out.push('\t');
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

/// Parses the [`emit_embeddings_tsv`] format.
pub fn parse_embeddings_tsv(content: &str) -> Result<Vec<(String, Vec<f64>)>, GcnError> {
    let mut entries = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default();
        let count: usize = fields
            .next()
            .ok_or_else(|| GcnError::Malformed { line: line_no, reason: "missing component count".into() })?
            .parse()
            .map_err(|_| GcnError::Malformed { line: line_no, reason: "bad component count".into() })?;
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| GcnError::Malformed {
                    line: line_no,
                    reason: format!("bad value `{f}`"),
                })
            })
            .collect::<Result<_, _>>()?;
        if values.len() != count {
            return Err(GcnError::Malformed {
                line: line_no,
                reason: format!("declared {count} components, found {}", values.len()),
            });
        }
        entries.push((id.to_string(), values));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn layer_with_identity_adjacency_and_weights_is_x() {
        let x = mat(&[vec![1.0, -2.0], vec![0.5, 3.0]]);
        let got = gcn_layer(&DenseMatrix::identity(2), &x, &DenseMatrix::identity(2)).unwrap();
        assert_eq!(got, x);
    }

    #[test]
    fn layer_matches_hand_product() {
        let a = mat(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let w = mat(&[vec![1.0], vec![2.0]]);
        let got = gcn_layer(&a, &DenseMatrix::identity(2), &w).unwrap();
        assert_eq!(got, mat(&[vec![1.5], vec![1.5]]));
    }

    #[test]
    fn layer_rejects_bad_shapes() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            gcn_layer(&a, &DenseMatrix::zeros(2, 2), &DenseMatrix::zeros(2, 2)),
            Err(GcnError::NonSquareAdjacency { rows: 2, cols: 3 })
        ));
        let a = DenseMatrix::identity(2);
        assert!(gcn_layer(&a, &DenseMatrix::zeros(3, 2), &DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn forward_matches_hand_computation() {
        let x = mat(&[vec![1.0, 1.0]]);
        let a = mat(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let params =
            VgcnParams { w_vh: mat(&[vec![1.0], vec![1.0]]), w_hc: mat(&[vec![2.0]]) };
        let out = vgcn_forward(&x, &a, &params).unwrap();
        assert_eq!(out, mat(&[vec![4.0]]));
    }

    #[test]
    fn relu_kills_negative_preactivations() {
        let x = mat(&[vec![1.0, 2.0]]);
        let a = mat(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let params = VgcnParams {
            w_vh: mat(&[vec![-1.0, -0.5], vec![-2.0, -1.5]]),
            w_hc: mat(&[vec![3.0], vec![4.0]]),
        };
        let out = vgcn_forward(&x, &a, &params).unwrap();
        assert_eq!(out, mat(&[vec![0.0]]));
    }

    #[test]
    fn identity_output_weights_expose_hidden_layer() {
        let x = mat(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let a = mat(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let params = VgcnParams {
            w_vh: mat(&[vec![1.0, -1.0], vec![0.5, 2.0]]),
            w_hc: DenseMatrix::identity(2),
        };
        let out = vgcn_forward(&x, &a, &params).unwrap();
        assert_eq!(out, mat(&[vec![1.0, 0.0], vec![1.0, 4.0]]));
    }

    #[test]
    fn gradients_match_hand_chain_rule() {
        let x = mat(&[vec![1.0, 1.0]]);
        let a = mat(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let params =
            VgcnParams { w_vh: mat(&[vec![1.0], vec![1.0]]), w_hc: mat(&[vec![2.0]]) };
        let upstream = mat(&[vec![1.0]]);
        let (g_vh, g_hc) = vgcn_gradients(&x, &a, &params, &upstream).unwrap();
        assert_eq!(g_hc, mat(&[vec![2.0]]));
        assert_eq!(g_vh, mat(&[vec![2.0], vec![2.0]]));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let x = mat(&[vec![0.3, -1.2], vec![2.0, 0.1]]);
        let a = mat(&[vec![0.8, 0.2], vec![0.2, 0.8]]);
        let params = VgcnParams {
            w_vh: mat(&[vec![0.4, -0.7], vec![1.1, 0.9]]),
            w_hc: mat(&[vec![0.5], vec![-0.25]]),
        };
        let upstream = DenseMatrix::zeros(2, 1);
        let (g_vh, g_hc) = vgcn_gradients(&x, &a, &params, &upstream).unwrap();
        assert_eq!(g_vh, DenseMatrix::zeros(2, 2));
        assert_eq!(g_hc, DenseMatrix::zeros(2, 1));
    }

    #[test]
    fn upstream_shape_is_validated() {
        let x = mat(&[vec![1.0, 1.0]]);
        let a = DenseMatrix::identity(2);
        let params =
            VgcnParams { w_vh: mat(&[vec![1.0], vec![1.0]]), w_hc: mat(&[vec![2.0]]) };
        let bad = DenseMatrix::zeros(2, 2);
        assert!(vgcn_gradients(&x, &a, &params, &bad).is_err());
    }

    #[test]
    fn finite_differences_confirm_gradients() {
        // Small fixed instance; the acceptance suite runs the randomized
        // version over 100 seeds.
        let x = mat(&[vec![0.9, -0.4, 0.7], vec![-0.6, 1.1, 0.3]]);
        let a = mat(&[
            vec![0.7, 0.2, 0.1],
            vec![0.2, 0.6, 0.2],
            vec![0.1, 0.2, 0.7],
        ]);
        let mut params = VgcnParams {
            w_vh: mat(&[vec![0.8, -0.3], vec![0.5, 0.9], vec![-0.7, 0.4]]),
            w_hc: mat(&[vec![1.2, -0.8], vec![0.6, 1.4]]),
        };
        let upstream = mat(&[vec![0.3, -1.0], vec![0.8, 0.5]]);
        let objective = |p: &VgcnParams| {
            let out = vgcn_forward(&x, &a, p).unwrap();
            out.data().iter().zip(upstream.data()).map(|(o, u)| o * u).sum::<f64>()
        };
        let (g_vh, g_hc) = vgcn_gradients(&x, &a, &params, &upstream).unwrap();

        let h = 1e-5;
        for (r, c, analytic) in [(0usize, 0usize, &g_vh), (2, 1, &g_vh)].map(|(r, c, g)| (r, c, g.get(r, c))) {
            let base = params.w_vh.get(r, c);
            params.w_vh.set(r, c, base + h);
            let plus = objective(&params);
            params.w_vh.set(r, c, base - h);
            let minus = objective(&params);
            params.w_vh.set(r, c, base);
            let fd = (plus - minus) / (2.0 * h);
            assert!((analytic - fd).abs() / analytic.abs().max(1.0) < 1e-6);
        }
        let base = params.w_hc.get(1, 0);
        params.w_hc.set(1, 0, base + h);
        let plus = objective(&params);
        params.w_hc.set(1, 0, base - h);
        let minus = objective(&params);
        params.w_hc.set(1, 0, base);
        let fd = (plus - minus) / (2.0 * h);
        assert!((g_hc.get(1, 0) - fd).abs() / g_hc.get(1, 0).abs().max(1.0) < 1e-6);
    }

    #[test]
    fn sentence_features_count_known_tokens() {
        let vocab = Vocabulary::from_tokens(["a", "b"]);
        let tokens: Vec<String> = ["a", "b", "a"].iter().map(|t| t.to_string()).collect();
        assert_eq!(build_sentence_features(&tokens, &vocab), mat(&[vec![2.0, 1.0]]));

        assert_eq!(build_sentence_features(&[], &vocab), DenseMatrix::zeros(1, 2));
        let unk: Vec<String> = vec![UNKNOWN_TOKEN.to_string(); 3];
        assert_eq!(build_sentence_features(&unk, &vocab), DenseMatrix::zeros(1, 2));
        let stray: Vec<String> = vec!["zzz".into(), "a".into()];
        assert_eq!(build_sentence_features(&stray, &vocab), mat(&[vec![1.0, 0.0]]));
    }

    #[test]
    fn batch_features_stack_rows() {
        let vocab = Vocabulary::from_tokens(["a", "b"]);
        let batch = build_batch_features(
            &[vec!["a".into()], vec!["b".into(), "b".into()]],
            &vocab,
        );
        assert_eq!(batch, mat(&[vec![1.0, 0.0], vec![0.0, 2.0]]));
    }

    #[test]
    fn exact_fit_concatenation_prepends_one_row() {
        let graph_emb = mat(&[vec![9.0, 8.0]]);
        let tokens = mat(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = concat_embeddings(&graph_emb, &tokens).unwrap();
        assert_eq!(out, mat(&[vec![9.0, 8.0], vec![1.0, 2.0], vec![3.0, 4.0]]));
    }

    #[test]
    fn wide_embeddings_wrap_into_padded_rows() {
        let graph_emb = mat(&[vec![1.0, 2.0, 3.0, 4.0, 5.0]]);
        let tokens = mat(&[vec![7.0, 7.0]]);
        let out = concat_embeddings(&graph_emb, &tokens).unwrap();
        assert_eq!(
            out,
            mat(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 0.0], vec![7.0, 7.0]])
        );
    }

    #[test]
    fn zero_graph_embedding_preserves_token_rows() {
        let graph_emb = DenseMatrix::zeros(1, 3);
        let tokens = mat(&[vec![0.25, -1.5, 3.75]]);
        let out = concat_embeddings(&graph_emb, &tokens).unwrap();
        assert_eq!(out.row(1), tokens.row(0));
        assert_eq!(out.row(0), &[0.0, 0.0, 0.0]);

        assert!(matches!(
            concat_embeddings(&graph_emb, &DenseMatrix::zeros(1, 0)),
            Err(GcnError::ZeroEmbeddingWidth)
        ));
    }

    #[test]
    fn embeddings_tsv_round_trips() {
        let entries = vec![
            ("10:0:T1:T2".to_string(), vec![1.0 / 3.0, -2.5e-7]),
            ("11:2:T4:T9".to_string(), vec![0.0]),
        ];
        let tsv = emit_embeddings_tsv(&entries);
        assert_eq!(parse_embeddings_tsv(&tsv).unwrap(), entries);
        assert!(tsv.starts_with("10:0:T1:T2\t2\t"));

        assert!(matches!(
            parse_embeddings_tsv("id\t2\t1.0\n"),
            Err(GcnError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_embeddings_tsv("id\tx\n"),
            Err(GcnError::Malformed { line: 1, .. })
        ));
    }
}
