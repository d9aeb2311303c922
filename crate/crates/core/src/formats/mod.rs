//! Parsers and emitters for the three corpus formats.
//!
//! * [`brat`] - BRAT standoff: one `.txt` / `.ann` pair per document.
//! * [`tsv`]  - BioCreative-style TSV: three files (abstracts, entities,
//!   relations) per corpus.
//! * [`json`] - single-file JSON interchange format.
//!
//! BRAT and JSON round trips are lossless: `parse(emit(doc)) == doc` for any
//! document whose annotation vectors are in canonical emission order, and
//! re-emitting a parsed file reproduces it byte for byte. TSV preserves all
//! annotations but does not carry relation ids or provenance tags; parsing
//! assigns fresh `R1..Rn` ids in row order.
//!
//! Every parser validates the result against the document invariants
//! (span bounds, surface agreement, argument roles), so a successful parse
//! always yields a structurally sound corpus.

pub mod brat;
pub mod json;
pub mod tsv;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Document, Split};

/// Errors raised by the format layer.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{file}:{line}: malformed line: {reason}")]
    MalformedLine { file: String, line: usize, reason: String },
    #[error("entity span disagrees with document text: {0}")]
    SpanMismatch(CorpusError),
    #[error("relation references a missing entity: {0}")]
    DanglingReference(CorpusError),
    #[error("{file}:{line}: row references unknown document `{doc_id}`")]
    UnknownDocId { file: String, line: usize, doc_id: String },
    #[error("{file}:{line}: malformed row: {reason}")]
    MalformedRow { file: String, line: usize, reason: String },
    #[error("{file}:{line}: unknown label `{label}`")]
    UnknownLabel { file: String, line: usize, label: String },
    #[error("schema violation at {path}: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error(transparent)]
    Corpus(CorpusError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl FormatError {
    /// Routes document-invariant failures to the spanmatch/reference
    /// variants they describe.
    pub(crate) fn from_corpus(err: CorpusError) -> Self {
        match err {
            CorpusError::SurfaceMismatch { .. }
            | CorpusError::SpanOutOfBounds { .. }
            | CorpusError::InvalidSpan { .. } => FormatError::SpanMismatch(err),
            CorpusError::DanglingReference { .. } => FormatError::DanglingReference(err),
            other => FormatError::Corpus(other),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io { path: path.to_path_buf(), source }
    }
}

/// Reads a directory of BRAT `.txt`/`.ann` pairs into a corpus. The document
/// id is the file stem; a missing `.ann` file means an unannotated document.
pub fn read_brat_dir(dir: &Path, split: Split) -> Result<Corpus, FormatError> {
    let mut stems: Vec<(String, PathBuf)> = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| FormatError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| FormatError::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push((stem.to_string(), path.clone()));
            }
        }
    }
    stems.sort();

    let parse_one = |(stem, txt_path): &(String, PathBuf)| -> Result<Document, FormatError> {
        let txt = std::fs::read_to_string(txt_path).map_err(|e| FormatError::io(txt_path, e))?;
        let ann_path = txt_path.with_extension("ann");
        let ann = if ann_path.exists() {
            std::fs::read_to_string(&ann_path).map_err(|e| FormatError::io(&ann_path, e))?
        } else {
            String::new()
        };
        brat::parse_brat(stem, &txt, &ann)
    };

    #[cfg(feature = "parallel")]
    let docs: Result<Vec<Document>, FormatError> = {
        use rayon::prelude::*;
        stems.par_iter().map(parse_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let docs: Result<Vec<Document>, FormatError> = stems.iter().map(parse_one).collect();

    let mut corpus = Corpus::new(split);
    for doc in docs? {
        corpus.insert(doc);
    }
    Ok(corpus)
}

/// Writes a corpus as BRAT `.txt`/`.ann` pairs named by document id.
pub fn write_brat_dir(corpus: &Corpus, dir: &Path) -> Result<(), FormatError> {
    std::fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    for doc in corpus.docs.values() {
        let (txt, ann) = brat::emit_brat(doc);
        let txt_path = dir.join(format!("{}.txt", doc.doc_id));
        let ann_path = dir.join(format!("{}.ann", doc.doc_id));
        std::fs::write(&txt_path, txt).map_err(|e| FormatError::io(&txt_path, e))?;
        std::fs::write(&ann_path, ann).map_err(|e| FormatError::io(&ann_path, e))?;
    }
    Ok(())
}

/// File names used for a TSV corpus directory.
pub const TSV_ABSTRACTS: &str = "abstracts.tsv";
pub const TSV_ENTITIES: &str = "entities.tsv";
pub const TSV_RELATIONS: &str = "relations.tsv";

/// Reads a corpus from a directory holding `abstracts.tsv`, `entities.tsv`,
/// and `relations.tsv`.
pub fn read_tsv_dir(dir: &Path, split: Split) -> Result<Corpus, FormatError> {
    let read = |name: &str| -> Result<String, FormatError> {
        let path = dir.join(name);
        std::fs::read_to_string(&path).map_err(|e| FormatError::io(&path, e))
    };
    tsv::parse_biocreative_tsv(&read(TSV_ABSTRACTS)?, &read(TSV_ENTITIES)?, &read(TSV_RELATIONS)?, split)
}

/// Writes a corpus as the three-file TSV layout.
pub fn write_tsv_dir(corpus: &Corpus, dir: &Path) -> Result<(), FormatError> {
    std::fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    let (abstracts, entities, relations) = tsv::emit_biocreative_tsv(corpus);
    for (name, content) in [
        (TSV_ABSTRACTS, abstracts),
        (TSV_ENTITIES, entities),
        (TSV_RELATIONS, relations),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| FormatError::io(&path, e))?;
    }
    Ok(())
}

/// Reads a JSON corpus file.
pub fn read_json_file(path: &Path) -> Result<Corpus, FormatError> {
    let content = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    json::parse_json_corpus(&content)
}

/// Writes a JSON corpus file.
pub fn write_json_file(corpus: &Corpus, path: &Path) -> Result<(), FormatError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| FormatError::io(parent, e))?;
        }
    }
    std::fs::write(path, json::emit_json_corpus(corpus)).map_err(|e| FormatError::io(path, e))
}
