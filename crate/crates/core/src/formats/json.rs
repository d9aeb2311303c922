//! Single-file JSON interchange format.
//!
//! ```json
//! {
//!   "split": "train",
//!   "docs": {
//!     "10185032": {
//!       "title": "...",
//!       "abstract": "...",
//!       "entities": [{"id": "T1", "type": "CHEMICAL", "start": 0, "end": 7, "text": "Aspirin"}],
//!       "relations": [{"id": "R1", "label": "INHIBITOR", "arg1": "T1", "arg2": "T2"}]
//!     }
//!   }
//! }
//! ```
//!
//! Two optional per-document fields keep the format lossless against the
//! full document model: `"provenance"` (array of source tags) and
//! `"extra_annotations"` (preserved annotation lines); both are omitted when
//! empty. Unknown keys anywhere are schema violations, reported with a
//! dotted JSON path. Emission is compact, with documents in id order and a
//! fixed field order, so identical corpora serialize byte-identically.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::corpus::{
    Corpus, Document, Entity, Relation, Span, Split,
};

use super::FormatError;

/// Parses a JSON corpus, validating both schema and document invariants.
pub fn parse_json_corpus(content: &str) -> Result<Corpus, FormatError> {
    let root: Value = serde_json::from_str(content)
        .map_err(|e| violation("", &format!("invalid JSON: {e}")))?;
    let obj = as_object(&root, "")?;
    check_keys(obj, "", &["split", "docs"])?;

    let split_str = as_str(require(obj, "split", "")?, "split")?;
    let split: Split = split_str
        .parse()
        .map_err(|e: String| violation("split", &e))?;

    let docs_val = require(obj, "docs", "")?;
    let docs = as_object(docs_val, "docs")?;

    let mut corpus = Corpus::new(split);
    for (doc_id, doc_val) in docs {
        let path = format!("docs.{doc_id}");
        let doc = parse_document(doc_id, doc_val, &path)?;
        doc.validate().map_err(FormatError::from_corpus)?;
        corpus.insert(doc);
    }
    Ok(corpus)
}

fn parse_document(doc_id: &str, value: &Value, path: &str) -> Result<Document, FormatError> {
    let obj = as_object(value, path)?;
    check_keys(
        obj,
        path,
        &["title", "abstract", "entities", "relations", "provenance", "extra_annotations"],
    )?;

    let mut doc = Document {
        doc_id: doc_id.to_string(),
        title: as_str(require(obj, "title", path)?, &format!("{path}.title"))?.to_string(),
        abstract_text: as_str(require(obj, "abstract", path)?, &format!("{path}.abstract"))?
            .to_string(),
        ..Document::default()
    };

    let ents = as_array(require(obj, "entities", path)?, &format!("{path}.entities"))?;
    for (i, e) in ents.iter().enumerate() {
        doc.entities.push(parse_entity(e, &format!("{path}.entities[{i}]"))?);
    }
    let rels = as_array(require(obj, "relations", path)?, &format!("{path}.relations"))?;
    for (i, r) in rels.iter().enumerate() {
        doc.relations.push(parse_relation(r, &format!("{path}.relations[{i}]"))?);
    }
    if let Some(prov) = obj.get("provenance") {
        let arr = as_array(prov, &format!("{path}.provenance"))?;
        for (i, tag) in arr.iter().enumerate() {
            let p = format!("{path}.provenance[{i}]");
            let tag = as_str(tag, &p)?.parse().map_err(|e: String| violation(&p, &e))?;
            doc.provenance.insert(tag);
        }
    }
    if let Some(extra) = obj.get("extra_annotations") {
        let arr = as_array(extra, &format!("{path}.extra_annotations"))?;
        for (i, line) in arr.iter().enumerate() {
            let p = format!("{path}.extra_annotations[{i}]");
            doc.extra_ann.push(as_str(line, &p)?.to_string());
        }
    }
    Ok(doc)
}

fn parse_entity(value: &Value, path: &str) -> Result<Entity, FormatError> {
    let obj = as_object(value, path)?;
    check_keys(obj, path, &["id", "type", "start", "end", "text"])?;
    let type_path = format!("{path}.type");
    let etype = as_str(require(obj, "type", path)?, &type_path)?
        .parse()
        .map_err(|e: String| violation(&type_path, &e))?;
    Ok(Entity {
        id: as_str(require(obj, "id", path)?, &format!("{path}.id"))?.to_string(),
        etype,
        span: Span::new(
            as_offset(require(obj, "start", path)?, &format!("{path}.start"))?,
            as_offset(require(obj, "end", path)?, &format!("{path}.end"))?,
        ),
        surface: as_str(require(obj, "text", path)?, &format!("{path}.text"))?.to_string(),
    })
}

fn parse_relation(value: &Value, path: &str) -> Result<Relation, FormatError> {
    let obj = as_object(value, path)?;
    check_keys(obj, path, &["id", "label", "arg1", "arg2"])?;
    let label_path = format!("{path}.label");
    let label = as_str(require(obj, "label", path)?, &label_path)?
        .parse()
        .map_err(|e: String| violation(&label_path, &e))?;
    Ok(Relation {
        id: as_str(require(obj, "id", path)?, &format!("{path}.id"))?.to_string(),
        label,
        arg1: as_str(require(obj, "arg1", path)?, &format!("{path}.arg1"))?.to_string(),
        arg2: as_str(require(obj, "arg2", path)?, &format!("{path}.arg2"))?.to_string(),
    })
}

/// Emits the compact canonical JSON for a corpus.
pub fn emit_json_corpus(corpus: &Corpus) -> String {
    #[derive(Serialize)]
    struct EntOut<'a> {
        id: &'a str,
        #[serde(rename = "type")]
        etype: &'a str,
        start: usize,
        end: usize,
        text: &'a str,
    }
    #[derive(Serialize)]
    struct RelOut<'a> {
        id: &'a str,
        label: &'a str,
        arg1: &'a str,
        arg2: &'a str,
    }
    #[derive(Serialize)]
    struct DocOut<'a> {
        title: &'a str,
        #[serde(rename = "abstract")]
        abstract_text: &'a str,
        entities: Vec<EntOut<'a>>,
        relations: Vec<RelOut<'a>>,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        provenance: Vec<&'a str>,
        #[serde(skip_serializing_if = "Vec::is_empty")]
        extra_annotations: Vec<&'a str>,
    }
    #[derive(Serialize)]
    struct CorpusOut<'a> {
        split: &'a str,
        docs: BTreeMap<&'a str, DocOut<'a>>,
    }

    let out = CorpusOut {
        split: corpus.split.as_str(),
        docs: corpus
            .docs
            .values()
            .map(|doc| {
                (
                    doc.doc_id.as_str(),
                    DocOut {
                        title: &doc.title,
                        abstract_text: &doc.abstract_text,
                        entities: doc
                            .entities
                            .iter()
                            .map(|e| EntOut {
                                id: &e.id,
                                etype: e.etype.as_str(),
                                start: e.span.start,
                                end: e.span.end,
                                text: &e.surface,
                            })
                            .collect(),
                        relations: doc
                            .relations
                            .iter()
                            .map(|r| RelOut {
                                id: &r.id,
                                label: r.label.as_str(),
                                arg1: &r.arg1,
                                arg2: &r.arg2,
                            })
                            .collect(),
                        provenance: doc.provenance.iter().map(|t| t.as_str()).collect(),
                        extra_annotations: doc.extra_ann.iter().map(|s| s.as_str()).collect(),
                    },
                )
            })
            .collect(),
    };
    serde_json::to_string(&out).expect("corpus serialization cannot fail")
}

fn violation(path: &str, reason: &str) -> FormatError {
    let path = if path.is_empty() { "(root)" } else { path };
    FormatError::SchemaViolation { path: path.to_string(), reason: reason.to_string() }
}

fn require<'a>(
    obj: &'a serde_json::Map<String, Value>,
    key: &str,
    path: &str,
) -> Result<&'a Value, FormatError> {
    obj.get(key).ok_or_else(|| {
        let at = if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
        violation(&at, "missing required field")
    })
}

fn check_keys(
    obj: &serde_json::Map<String, Value>,
    path: &str,
    allowed: &[&str],
) -> Result<(), FormatError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            let at = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
            return Err(violation(&at, "unknown field"));
        }
    }
    Ok(())
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a serde_json::Map<String, Value>, FormatError> {
    v.as_object().ok_or_else(|| violation(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, FormatError> {
    v.as_array().ok_or_else(|| violation(path, "expected an array"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, FormatError> {
    v.as_str().ok_or_else(|| violation(path, "expected a string"))
}

fn as_offset(v: &Value, path: &str) -> Result<usize, FormatError> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| violation(path, "expected a non-negative integer"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntityType, FineRelation, GeneSubtype, RelationLabel, SourceTag};

    fn sample() -> Corpus {
        let mut corpus = Corpus::new(Split::Train);
        let mut doc = Document {
            doc_id: "10".into(),
            title: "Aspirin inhibits COX".into(),
            abstract_text: "More αβ text.".into(),
            ..Document::default()
        };
        doc.entities.push(Entity {
            id: "T1".into(),
            etype: EntityType::Chemical,
            span: Span::new(0, 7),
            surface: "Aspirin".into(),
        });
        doc.entities.push(Entity {
            id: "T2".into(),
            etype: EntityType::Gene(GeneSubtype::NonNormalizable),
            span: Span::new(17, 20),
            surface: "COX".into(),
        });
        doc.relations.push(Relation {
            id: "R1".into(),
            label: RelationLabel::Fine(FineRelation::Inhibitor),
            arg1: "T1".into(),
            arg2: "T2".into(),
        });
        doc.provenance.insert(SourceTag::ChemProt);
        corpus.insert(doc);
        corpus
    }

    #[test]
    fn empty_corpus_has_the_canonical_shape() {
        let corpus = Corpus::new(Split::Train);
        assert_eq!(emit_json_corpus(&corpus), r#"{"split":"train","docs":{}}"#);
    }

    #[test]
    fn round_trip_preserves_everything() {
        let corpus = sample();
        let json = emit_json_corpus(&corpus);
        let parsed = parse_json_corpus(&json).unwrap();
        assert_eq!(parsed, corpus);
        assert_eq!(emit_json_corpus(&parsed), json);
    }

    #[test]
    fn optional_fields_are_omitted_when_empty() {
        let mut corpus = sample();
        corpus.docs.get_mut("10").unwrap().provenance.clear();
        let json = emit_json_corpus(&corpus);
        assert!(!json.contains("provenance"));
        assert!(!json.contains("extra_annotations"));
        assert_eq!(parse_json_corpus(&json).unwrap(), corpus);
    }

    #[test]
    fn unknown_keys_are_schema_violations_with_paths() {
        let json = r#"{"split":"train","docs":{},"extra":1}"#;
        let err = parse_json_corpus(json).unwrap_err();
        assert!(matches!(err, FormatError::SchemaViolation { ref path, .. } if path == "extra"));

        let json = r#"{"split":"train","docs":{"10":{"title":"t","abstract":"a","entities":[],"relations":[],"junk":0}}}"#;
        let err = parse_json_corpus(json).unwrap_err();
        assert!(
            matches!(err, FormatError::SchemaViolation { ref path, .. } if path == "docs.10.junk")
        );
    }

    #[test]
    fn missing_and_mistyped_fields_report_precise_paths() {
        let json = r#"{"split":"train","docs":{"10":{"title":"t","entities":[],"relations":[]}}}"#;
        let err = parse_json_corpus(json).unwrap_err();
        assert!(
            matches!(err, FormatError::SchemaViolation { ref path, .. } if path == "docs.10.abstract")
        );

        let json = r#"{"split":"train","docs":{"10":{"title":"t","abstract":"a","entities":[{"id":"T1","type":"CHEMICAL","start":"0","end":1,"text":"t"}],"relations":[]}}}"#;
        let err = parse_json_corpus(json).unwrap_err();
        assert!(matches!(
            err,
            FormatError::SchemaViolation { ref path, .. } if path == "docs.10.entities[0].start"
        ));
    }

    #[test]
    fn bad_labels_point_at_their_path() {
        let json = r#"{"split":"train","docs":{"10":{"title":"ti","abstract":"a","entities":[],"relations":[{"id":"R1","label":"BINDS","arg1":"T1","arg2":"T2"}]}}}"#;
        let err = parse_json_corpus(json).unwrap_err();
        assert!(matches!(
            err,
            FormatError::SchemaViolation { ref path, .. } if path == "docs.10.relations[0].label"
        ));
    }

    #[test]
    fn bad_split_is_rejected() {
        let err = parse_json_corpus(r#"{"split":"test","docs":{}}"#).unwrap_err();
        assert!(matches!(err, FormatError::SchemaViolation { ref path, .. } if path == "split"));
    }

    #[test]
    fn document_invariants_still_apply() {
        // Entity text disagrees with the title slice.
        let json = r#"{"split":"train","docs":{"10":{"title":"Aspirin","abstract":"","entities":[{"id":"T1","type":"CHEMICAL","start":0,"end":7,"text":"Aspirim"}],"relations":[]}}}"#;
        let err = parse_json_corpus(json).unwrap_err();
        assert!(matches!(err, FormatError::SpanMismatch(_)));
    }
}
