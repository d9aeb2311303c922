//! BioCreative-style TSV corpus format: three tab-separated files.
//!
//! ```text
//! abstracts: doc_id<TAB>title<TAB>abstract
//! entities:  doc_id<TAB>T<id><TAB>type<TAB>start<TAB>end<TAB>surface
//! relations: doc_id<TAB>label<TAB>Arg1:T<i><TAB>Arg2:T<j>
//! ```
//!
//! Relation rows carry no id, so parsing assigns `R1..Rn` per document in
//! row order; emission preserves stored entity and relation order, making
//! `parse(emit(corpus))` the identity up to regenerated relation ids and
//! dropped provenance tags (the layout has no column for either).

use std::collections::BTreeMap;

use crate::corpus::{Corpus, Document, Entity, EntityType, Relation, RelationLabel, Span, Split};

use super::FormatError;

/// Parses the three TSV files into a corpus for the given split (the layout
/// does not record one).
pub fn parse_biocreative_tsv(
    abstracts: &str,
    entities: &str,
    relations: &str,
    split: Split,
) -> Result<Corpus, FormatError> {
    let mut docs: BTreeMap<String, Document> = BTreeMap::new();

    for (idx, line) in non_empty_lines(abstracts) {
        let mut parts = line.splitn(3, '\t');
        let doc_id = parts.next().unwrap_or_default();
        let (Some(title), Some(abstract_text)) = (parts.next(), parts.next()) else {
            return Err(row_error("abstracts", idx, "expected `doc_id<TAB>title<TAB>abstract`"));
        };
        if doc_id.is_empty() {
            return Err(row_error("abstracts", idx, "empty doc_id"));
        }
        let prev = docs.insert(
            doc_id.to_string(),
            Document {
                doc_id: doc_id.to_string(),
                title: title.to_string(),
                abstract_text: abstract_text.to_string(),
                ..Document::default()
            },
        );
        if prev.is_some() {
            return Err(row_error("abstracts", idx, &format!("duplicate doc_id `{doc_id}`")));
        }
    }

    for (idx, line) in non_empty_lines(entities) {
        let parts: Vec<&str> = line.splitn(6, '\t').collect();
        let [doc_id, id, type_str, start_str, end_str, surface] = parts.as_slice() else {
            return Err(row_error(
                "entities",
                idx,
                "expected `doc_id<TAB>id<TAB>type<TAB>start<TAB>end<TAB>surface`",
            ));
        };
        let doc = docs.get_mut(*doc_id).ok_or_else(|| FormatError::UnknownDocId {
            file: "entities".into(),
            line: idx,
            doc_id: doc_id.to_string(),
        })?;
        let etype: EntityType = type_str.parse().map_err(|_| FormatError::UnknownLabel {
            file: "entities".into(),
            line: idx,
            label: type_str.to_string(),
        })?;
        let start: usize = start_str
            .parse()
            .map_err(|_| row_error("entities", idx, &format!("bad start offset `{start_str}`")))?;
        let end: usize = end_str
            .parse()
            .map_err(|_| row_error("entities", idx, &format!("bad end offset `{end_str}`")))?;
        doc.entities.push(Entity {
            id: id.to_string(),
            etype,
            span: Span::new(start, end),
            surface: surface.to_string(),
        });
    }

    for (idx, line) in non_empty_lines(relations) {
        let parts: Vec<&str> = line.split('\t').collect();
        let [doc_id, label_str, arg1_str, arg2_str] = parts.as_slice() else {
            return Err(row_error(
                "relations",
                idx,
                "expected `doc_id<TAB>label<TAB>Arg1:Ti<TAB>Arg2:Tj`",
            ));
        };
        let doc = docs.get_mut(*doc_id).ok_or_else(|| FormatError::UnknownDocId {
            file: "relations".into(),
            line: idx,
            doc_id: doc_id.to_string(),
        })?;
        let label: RelationLabel = label_str.parse().map_err(|_| FormatError::UnknownLabel {
            file: "relations".into(),
            line: idx,
            label: label_str.to_string(),
        })?;
        let arg1 = arg1_str
            .strip_prefix("Arg1:")
            .ok_or_else(|| row_error("relations", idx, &format!("expected `Arg1:<id>`, found `{arg1_str}`")))?;
        let arg2 = arg2_str
            .strip_prefix("Arg2:")
            .ok_or_else(|| row_error("relations", idx, &format!("expected `Arg2:<id>`, found `{arg2_str}`")))?;
        let rid = format!("R{}", doc.relations.len() + 1);
        doc.relations.push(Relation {
            id: rid,
            label,
            arg1: arg1.to_string(),
            arg2: arg2.to_string(),
        });
    }

    let mut corpus = Corpus::new(split);
    for (_, doc) in docs {
        doc.validate().map_err(FormatError::from_corpus)?;
        corpus.insert(doc);
    }
    Ok(corpus)
}

/// Emits the `(abstracts, entities, relations)` TSV contents. Documents are
/// written in corpus (id) order, annotations in stored order, so identical
/// corpora produce byte-identical files.
pub fn emit_biocreative_tsv(corpus: &Corpus) -> (String, String, String) {
    let mut abstracts = String::new();
    let mut entities = String::new();
    let mut relations = String::new();
    for doc in corpus.docs.values() {
        abstracts.push_str(&format!("{}\t{}\t{}\n", doc.doc_id, doc.title, doc.abstract_text));
        for e in &doc.entities {
            entities.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                doc.doc_id, e.id, e.etype, e.span.start, e.span.end, e.surface
            ));
        }
        for r in &doc.relations {
            relations.push_str(&format!(
                "{}\t{}\tArg1:{}\tArg2:{}\n",
                doc.doc_id, r.label, r.arg1, r.arg2
            ));
        }
    }
    (abstracts, entities, relations)
}

/// 1-based line numbers, empty lines skipped. `str::lines` strips `\r\n`.
fn non_empty_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i + 1, l))
}

fn row_error(file: &str, line: usize, reason: &str) -> FormatError {
    FormatError::MalformedRow { file: file.to_string(), line, reason: reason.to_string() }
}
