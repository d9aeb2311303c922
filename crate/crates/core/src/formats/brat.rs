//! BRAT standoff format.
//!
//! A document is a `.txt` file holding the title and abstract joined by one
//! tab, and a `.ann` file with one annotation per line:
//!
//! ```text
//! T1<TAB>CHEMICAL 0 7<TAB>Aspirin
//! T2<TAB>GENE-Y 17 20<TAB>COX
//! R1<TAB>INHIBITOR Arg1:T1 Arg2:T2
//! ```
//!
//! Entity types are `CHEMICAL`, `GENE`, `GENE-Y`, `GENE-N`; relation labels
//! are the fine annotation labels or `CPR:<n>` groups. Offsets count Unicode
//! scalar values over the tab-joined text. Discontinuous (semicolon) spans
//! are rejected. Lines of other annotation kinds are preserved verbatim and
//! re-emitted. Provenance tags travel in a `#provenance` comment line so the
//! format stays lossless.
//!
//! Emission is canonical: entities sorted by start offset then numeric id,
//! relations by numeric id, then the provenance comment, then preserved
//! lines in input order. CRLF input is normalized to LF before parsing.

use crate::corpus::{
    Document, Entity, EntityType, Relation, RelationLabel, SourceTag, Span,
};

use super::FormatError;

const PROVENANCE_PREFIX: &str = "#provenance\t";

/// Parses one document from the contents of its `.txt` and `.ann` files.
pub fn parse_brat(doc_id: &str, txt: &str, ann: &str) -> Result<Document, FormatError> {
    let txt = normalize_newlines(txt);
    let text = txt.strip_suffix('\n').unwrap_or(&txt);
    let (title, abstract_text) = match text.split_once('\t') {
        Some((t, a)) => (t.to_string(), a.to_string()),
        None => (text.to_string(), String::new()),
    };

    let mut doc = Document {
        doc_id: doc_id.to_string(),
        title,
        abstract_text,
        ..Document::default()
    };

    let ann = normalize_newlines(ann);
    let file = format!("{doc_id}.ann");
    for (idx, line) in ann.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let malformed = |reason: &str| FormatError::MalformedLine {
            file: file.clone(),
            line: line_no,
            reason: reason.to_string(),
        };
        if let Some(rest) = line.strip_prefix(PROVENANCE_PREFIX) {
            for tag in rest.split_whitespace() {
                let tag: SourceTag = tag.parse().map_err(|e: String| malformed(&e))?;
                doc.provenance.insert(tag);
            }
            continue;
        }
        match line_kind(line) {
            LineKind::Entity => doc.entities.push(parse_entity_line(line, &file, line_no)?),
            LineKind::Relation => doc.relations.push(parse_relation_line(line, &file, line_no)?),
            LineKind::Other => doc.extra_ann.push(line.to_string()),
            LineKind::Malformed(reason) => return Err(malformed(&reason)),
        }
    }

    doc.validate().map_err(FormatError::from_corpus)?;
    Ok(doc)
}

/// Emits the canonical `.txt` and `.ann` contents for a document.
pub fn emit_brat(doc: &Document) -> (String, String) {
    let mut txt = doc.full_text();
    txt.push('\n');

    let mut entities: Vec<&Entity> = doc.entities.iter().collect();
    entities.sort_by_key(|e| (e.span.start, numeric_id(&e.id), e.id.clone()));
    let mut relations: Vec<&Relation> = doc.relations.iter().collect();
    relations.sort_by_key(|r| (numeric_id(&r.id), r.id.clone()));

    let mut ann = String::new();
    for e in entities {
        ann.push_str(&format!(
            "{}\t{} {} {}\t{}\n",
            e.id, e.etype, e.span.start, e.span.end, e.surface
        ));
    }
    for r in relations {
        ann.push_str(&format!("{}\t{} Arg1:{} Arg2:{}\n", r.id, r.label, r.arg1, r.arg2));
    }
    if !doc.provenance.is_empty() {
        let tags: Vec<&str> = doc.provenance.iter().map(|t| t.as_str()).collect();
        ann.push_str(PROVENANCE_PREFIX);
        ann.push_str(&tags.join(" "));
        ann.push('\n');
    }
    for line in &doc.extra_ann {
        ann.push_str(line);
        ann.push('\n');
    }
    (txt, ann)
}

enum LineKind {
    Entity,
    Relation,
    Other,
    Malformed(String),
}

/// Classifies an annotation line. Ids must be `T<digits>` / `R<digits>`
/// followed by a tab; lines starting with `T`/`R` that fail that shape are
/// malformed rather than silently preserved.
fn line_kind(line: &str) -> LineKind {
    let mut chars = line.chars();
    let first = chars.next().unwrap_or(' ');
    if first != 'T' && first != 'R' {
        return LineKind::Other;
    }
    let Some(tab) = line.find('\t') else {
        return LineKind::Malformed(format!("`{}` line has no tab separator", first));
    };
    let id = &line[..tab];
    if id.len() < 2 || !id[1..].bytes().all(|b| b.is_ascii_digit()) {
        return LineKind::Malformed(format!("invalid annotation id `{id}`"));
    }
    if first == 'T' {
        LineKind::Entity
    } else {
        LineKind::Relation
    }
}

fn parse_entity_line(line: &str, file: &str, line_no: usize) -> Result<Entity, FormatError> {
    let malformed = |reason: String| FormatError::MalformedLine {
        file: file.to_string(),
        line: line_no,
        reason,
    };
    let mut parts = line.splitn(3, '\t');
    let id = parts.next().unwrap().to_string();
    let middle = parts
        .next()
        .ok_or_else(|| malformed("entity line needs `id<TAB>TYPE start end<TAB>surface`".into()))?;
    let surface = parts
        .next()
        .ok_or_else(|| malformed("entity line is missing the surface column".into()))?
        .to_string();

    if middle.contains(';') {
        return Err(malformed("discontinuous (semicolon) spans are not supported".into()));
    }
    let fields: Vec<&str> = middle.split_whitespace().collect();
    let [type_str, start_str, end_str] = fields.as_slice() else {
        return Err(malformed(format!("expected `TYPE start end`, found `{middle}`")));
    };
    let etype: EntityType = type_str.parse().map_err(|_| FormatError::UnknownLabel {
        file: file.to_string(),
        line: line_no,
        label: type_str.to_string(),
    })?;
    let start: usize = start_str
        .parse()
        .map_err(|_| malformed(format!("bad start offset `{start_str}`")))?;
    let end: usize = end_str
        .parse()
        .map_err(|_| malformed(format!("bad end offset `{end_str}`")))?;
    Ok(Entity { id, etype, span: Span::new(start, end), surface })
}

fn parse_relation_line(line: &str, file: &str, line_no: usize) -> Result<Relation, FormatError> {
    let malformed = |reason: String| FormatError::MalformedLine {
        file: file.to_string(),
        line: line_no,
        reason,
    };
    let mut parts = line.splitn(2, '\t');
    let id = parts.next().unwrap().to_string();
    let rest = parts
        .next()
        .ok_or_else(|| malformed("relation line needs `id<TAB>LABEL Arg1:Ti Arg2:Tj`".into()))?;
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let [label_str, arg1_str, arg2_str] = fields.as_slice() else {
        return Err(malformed(format!("expected `LABEL Arg1:Ti Arg2:Tj`, found `{rest}`")));
    };
    let label: RelationLabel = label_str.parse().map_err(|_| FormatError::UnknownLabel {
        file: file.to_string(),
        line: line_no,
        label: label_str.to_string(),
    })?;
    let arg1 = arg1_str
        .strip_prefix("Arg1:")
        .ok_or_else(|| malformed(format!("expected `Arg1:<id>`, found `{arg1_str}`")))?;
    let arg2 = arg2_str
        .strip_prefix("Arg2:")
        .ok_or_else(|| malformed(format!("expected `Arg2:<id>`, found `{arg2_str}`")))?;
    Ok(Relation { id, label, arg1: arg1.to_string(), arg2: arg2.to_string() })
}

/// Numeric part of a `T<digits>`/`R<digits>` id, for canonical sorting.
/// Non-conforming ids sort after all numeric ones.
fn numeric_id(id: &str) -> u64 {
    id.get(1..).and_then(|d| d.parse().ok()).unwrap_or(u64::MAX)
}

fn normalize_newlines(s: &str) -> String {
    s.replace("\r\n", "\n")
}
