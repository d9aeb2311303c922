//! Corpus merging with conflict detection and resolution.
//!
//! ChemProt and DrugProt annotate overlapping sets of PubMed abstracts, so a
//! combined training corpus must reconcile them. Documents present in only
//! one source are copied verbatim. For shared documents:
//!
//! * entities align on `(span, role)`, where role collapses gene subtypes;
//!   surfaces must agree (the texts are identical, so a disagreement means
//!   corrupted input) and gene subtypes merge to the most specific;
//! * relations key on `(chem span, gene span, label)`; the union is kept,
//!   and a pair annotated with the same label in both sources is stored
//!   once;
//! * a pair whose label sets differ between the sources is a conflict,
//!   resolved by the configured [`ConflictPolicy`];
//! * annotation ids are renumbered canonically: entities sorted by
//!   `(start, end, type)` become `T1..Tn`, relations sorted by
//!   `(arg1 index, arg2 index, label)` become `R1..Rm`.
//!
//! Merging the same corpus with itself therefore reproduces it (after
//! canonical renumbering) with zero conflicts, and `merge(a, b, PreferA)`
//! equals `merge(b, a, PreferB)` exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    Corpus, CprGroup, Document, Entity, EntityRole, EntityType, Relation,
    RelationLabel, Span,
};
use crate::prep::label_to_group;

/// Key identifying a relation pair inside one document.
pub type PairKey = (Span, Span);

/// A relation pair labeled differently by the two sources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub doc_id: String,
    pub chem_start: usize,
    pub chem_end: usize,
    pub gene_start: usize,
    pub gene_end: usize,
    /// Representative disagreeing label from corpus `a` (and `b`). When a
    /// pair carries several labels in one source, the representative is the
    /// smallest label unique to that source.
    pub label_a: RelationLabel,
    pub label_b: RelationLabel,
}

impl ConflictRecord {
    pub fn key(&self) -> (String, Span, Span) {
        (
            self.doc_id.clone(),
            Span::new(self.chem_start, self.chem_end),
            Span::new(self.gene_start, self.gene_end),
        )
    }
}

/// How label disagreements between the sources are settled.
#[derive(Debug, Clone, Default)]
pub enum ConflictPolicy {
    /// Refuse to merge; the error lists every conflict.
    #[default]
    Fail,
    /// Keep corpus `a`'s labels for conflicted pairs.
    PreferA,
    /// Keep corpus `b`'s labels for conflicted pairs.
    PreferB,
    /// Remove conflicted pairs from the merged corpus.
    Drop,
    /// Look each conflict up in a resolution table; every conflict must be
    /// covered or the merge fails.
    ResolutionFile(HashMap<(String, Span, Span), RelationLabel>),
}

/// Summary of one merge.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MergeReport {
    pub docs_only_a: usize,
    pub docs_only_b: usize,
    pub docs_shared: usize,
    /// All label disagreements, in `(doc_id, chem span, gene span)` order,
    /// whether resolved or dropped.
    pub conflicts: Vec<ConflictRecord>,
    /// Aligned entities whose surfaces disagreed. Populated only inside the
    /// corresponding error; a successful merge leaves it empty.
    pub entity_text_mismatches: Vec<String>,
}

/// Errors that abort a merge.
#[derive(Debug, Error)]
pub enum MergeError {
    #[error("cannot merge corpora from different splits ({a} vs {b})")]
    SplitMismatch { a: String, b: String },
    #[error("entity text disagrees between sources:\n{}", mismatches.join("\n"))]
    EntityTextMismatch { mismatches: Vec<String> },
    #[error("{} unresolved relation conflict(s); first: {first}", conflicts.len())]
    UnresolvedConflict { conflicts: Vec<ConflictRecord>, first: String },
    #[error("resolution file line {line}: {reason}")]
    MalformedResolution { line: usize, reason: String },
}

fn unresolved(conflicts: Vec<ConflictRecord>) -> MergeError {
    let first = conflicts
        .first()
        .map(|c| {
            format!(
                "{} ({}-{}, {}-{}): {} vs {}",
                c.doc_id, c.chem_start, c.chem_end, c.gene_start, c.gene_end, c.label_a, c.label_b
            )
        })
        .unwrap_or_default();
    MergeError::UnresolvedConflict { conflicts, first }
}

/// Merges two corpora of the same split under the given policy.
///
/// Shared documents are independent, so they merge in parallel when the
/// `parallel` feature is on; results are identical either way.
pub fn merge_corpora(
    a: &Corpus,
    b: &Corpus,
    policy: &ConflictPolicy,
) -> Result<(Corpus, MergeReport), MergeError> {
    #[cfg(feature = "parallel")]
    return merge_corpora_par(a, b, policy);
    #[cfg(not(feature = "parallel"))]
    merge_corpora_seq(a, b, policy)
}

/// Sequential [`merge_corpora`].
pub fn merge_corpora_seq(
    a: &Corpus,
    b: &Corpus,
    policy: &ConflictPolicy,
) -> Result<(Corpus, MergeReport), MergeError> {
    merge_corpora_impl(a, b, policy, false)
}

/// Per-document-parallel [`merge_corpora`].
#[cfg(feature = "parallel")]
pub fn merge_corpora_par(
    a: &Corpus,
    b: &Corpus,
    policy: &ConflictPolicy,
) -> Result<(Corpus, MergeReport), MergeError> {
    merge_corpora_impl(a, b, policy, true)
}

fn merge_corpora_impl(
    a: &Corpus,
    b: &Corpus,
    policy: &ConflictPolicy,
    parallel: bool,
) -> Result<(Corpus, MergeReport), MergeError> {
    if a.split != b.split {
        return Err(MergeError::SplitMismatch {
            a: a.split.to_string(),
            b: b.split.to_string(),
        });
    }

    let mut merged = Corpus::new(a.split);
    let mut report = MergeReport::default();

    let shared: Vec<&str> = a
        .docs
        .keys()
        .filter(|id| b.docs.contains_key(*id))
        .map(|id| id.as_str())
        .collect();
    report.docs_shared = shared.len();
    report.docs_only_a = a.docs.len() - shared.len();
    report.docs_only_b = b.docs.len() - shared.len();

    for (id, doc) in &a.docs {
        if !b.docs.contains_key(id) {
            merged.insert(doc.clone());
        }
    }
    for (id, doc) in &b.docs {
        if !a.docs.contains_key(id) {
            merged.insert(doc.clone());
        }
    }

    let merge_one = |id: &&str| merge_document(&a.docs[*id], &b.docs[*id], policy);
    let outcomes: Vec<DocOutcome> = if parallel {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            shared.par_iter().map(merge_one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        unreachable!("parallel merge requested without the `parallel` feature")
    } else {
        shared.iter().map(merge_one).collect()
    };

    let mut mismatches = Vec::new();
    let mut unresolved_conflicts = Vec::new();
    for outcome in outcomes {
        mismatches.extend(outcome.text_mismatches);
        unresolved_conflicts.extend(outcome.unresolved);
        report.conflicts.extend(outcome.conflicts);
        merged.insert(outcome.doc);
    }
    if !mismatches.is_empty() {
        return Err(MergeError::EntityTextMismatch { mismatches });
    }
    if !unresolved_conflicts.is_empty() {
        return Err(unresolved(unresolved_conflicts));
    }
    Ok((merged, report))
}

struct DocOutcome {
    doc: Document,
    conflicts: Vec<ConflictRecord>,
    unresolved: Vec<ConflictRecord>,
    text_mismatches: Vec<String>,
}

fn merge_document(doc_a: &Document, doc_b: &Document, policy: &ConflictPolicy) -> DocOutcome {
    let mut text_mismatches = Vec::new();
    if doc_a.full_text() != doc_b.full_text() {
        text_mismatches.push(format!("{}: document text differs between sources", doc_a.doc_id));
        return DocOutcome {
            doc: doc_a.clone(),
            conflicts: Vec::new(),
            unresolved: Vec::new(),
            text_mismatches,
        };
    }

    // Align entities on (span, role). Gene subtypes merge to the most
    // specific; surfaces are compared defensively even though equal texts
    // make a mismatch impossible for equal spans.
    let mut aligned: BTreeMap<(Span, EntityRole), Entity> = BTreeMap::new();
    for e in doc_a.entities.iter().chain(&doc_b.entities) {
        let key = (e.span, e.etype.role());
        match aligned.get_mut(&key) {
            None => {
                aligned.insert(key, e.clone());
            }
            Some(existing) => {
                if existing.surface != e.surface {
                    text_mismatches.push(format!(
                        "{}: span {} surface `{}` vs `{}`",
                        doc_a.doc_id, e.span, existing.surface, e.surface
                    ));
                }
                existing.etype = merge_types(existing.etype, e.etype);
            }
        }
    }

    // Canonical entity numbering: (start, end, type) order.
    let mut entities: Vec<Entity> = aligned.into_values().collect();
    entities.sort_by_key(|e| (e.span.start, e.span.end, e.etype));
    let mut index_of: HashMap<(Span, EntityRole), usize> = HashMap::new();
    for (i, e) in entities.iter_mut().enumerate() {
        e.id = format!("T{}", i + 1);
        index_of.insert((e.span, e.etype.role()), i);
    }

    // Relation label sets per pair and per source.
    let pair_labels = |doc: &Document| -> BTreeMap<PairKey, BTreeSet<RelationLabel>> {
        let by_id: HashMap<&str, &Entity> = doc.entities.iter().map(|e| (e.id.as_str(), e)).collect();
        let mut map: BTreeMap<PairKey, BTreeSet<RelationLabel>> = BTreeMap::new();
        for r in &doc.relations {
            let chem = by_id[r.arg1.as_str()].span;
            let gene = by_id[r.arg2.as_str()].span;
            map.entry((chem, gene)).or_default().insert(r.label);
        }
        map
    };
    let labels_a = pair_labels(doc_a);
    let labels_b = pair_labels(doc_b);

    let mut conflicts = Vec::new();
    let mut unresolved = Vec::new();
    let mut merged_pairs: BTreeMap<PairKey, BTreeSet<RelationLabel>> = BTreeMap::new();

    let keys: BTreeSet<&PairKey> = labels_a.keys().chain(labels_b.keys()).collect();
    for key in keys {
        let set_a = labels_a.get(key);
        let set_b = labels_b.get(key);
        let labels: BTreeSet<RelationLabel> = match (set_a, set_b) {
            (Some(sa), None) => sa.clone(),
            (None, Some(sb)) => sb.clone(),
            (Some(sa), Some(sb)) if sa == sb => sa.clone(),
            (Some(sa), Some(sb)) => {
                let record = ConflictRecord {
                    doc_id: doc_a.doc_id.clone(),
                    chem_start: key.0.start,
                    chem_end: key.0.end,
                    gene_start: key.1.start,
                    gene_end: key.1.end,
                    label_a: representative(sa, sb),
                    label_b: representative(sb, sa),
                };
                let resolved: Option<BTreeSet<RelationLabel>> = match policy {
                    ConflictPolicy::Fail => None,
                    ConflictPolicy::PreferA => Some(sa.clone()),
                    ConflictPolicy::PreferB => Some(sb.clone()),
                    ConflictPolicy::Drop => Some(BTreeSet::new()),
                    ConflictPolicy::ResolutionFile(table) => table
                        .get(&(doc_a.doc_id.clone(), key.0, key.1))
                        .map(|label| BTreeSet::from([*label])),
                };
                conflicts.push(record.clone());
                match resolved {
                    Some(labels) => labels,
                    None => {
                        unresolved.push(record);
                        continue;
                    }
                }
            }
            (None, None) => unreachable!("key came from one of the maps"),
        };
        if !labels.is_empty() {
            merged_pairs.insert(*key, labels);
        }
    }

    // Canonical relation numbering: (arg1 index, arg2 index, label) order.
    let mut triples: Vec<(usize, usize, RelationLabel)> = Vec::new();
    for ((chem, gene), labels) in &merged_pairs {
        let ci = index_of[&(*chem, EntityRole::Chemical)];
        let gi = index_of[&(*gene, EntityRole::Gene)];
        for label in labels {
            triples.push((ci, gi, *label));
        }
    }
    triples.sort();
    let relations: Vec<Relation> = triples
        .into_iter()
        .enumerate()
        .map(|(i, (ci, gi, label))| Relation {
            id: format!("R{}", i + 1),
            label,
            arg1: entities[ci].id.clone(),
            arg2: entities[gi].id.clone(),
        })
        .collect();

    // Preserved annotation lines: sorted, deduplicated union, which keeps
    // the merge symmetric under argument order.
    let mut extra: BTreeSet<String> =
        doc_a.extra_ann.iter().chain(&doc_b.extra_ann).cloned().collect();
    let extra_ann: Vec<String> = std::mem::take(&mut extra).into_iter().collect();

    let doc = Document {
        doc_id: doc_a.doc_id.clone(),
        title: doc_a.title.clone(),
        abstract_text: doc_a.abstract_text.clone(),
        entities,
        relations,
        provenance: doc_a.provenance.union(&doc_b.provenance).copied().collect(),
        extra_ann,
    };
    DocOutcome { doc, conflicts, unresolved, text_mismatches }
}

/// Smallest label distinguishing `own` from `other`; falls back to the
/// smallest label overall when `own` is a subset.
fn representative(own: &BTreeSet<RelationLabel>, other: &BTreeSet<RelationLabel>) -> RelationLabel {
    own.difference(other)
        .next()
        .or_else(|| own.iter().next())
        .copied()
        .expect("label sets are non-empty")
}

fn merge_types(a: EntityType, b: EntityType) -> EntityType {
    match (a, b) {
        (EntityType::Gene(x), EntityType::Gene(y)) => {
            // Unspecified < Normalizable < NonNormalizable; max is symmetric.
            EntityType::Gene(if x >= y { x } else { y })
        }
        _ => a,
    }
}

/// Renumbers a document's annotation ids canonically without changing its
/// content: entities sorted by `(start, end, type)` become `T1..Tn`,
/// relations sorted by `(arg1 index, arg2 index, label)` become `R1..Rm`.
pub fn canonicalize_document(doc: &Document) -> Document {
    let mut entities = doc.entities.clone();
    entities.sort_by_key(|e| (e.span.start, e.span.end, e.etype));
    let old_to_new: HashMap<String, String> = {
        let mut map = HashMap::new();
        for (i, e) in entities.iter().enumerate() {
            map.insert(e.id.clone(), format!("T{}", i + 1));
        }
        map
    };
    let order_of: HashMap<&str, usize> =
        entities.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();

    let mut relations = doc.relations.clone();
    relations.sort_by_key(|r| (order_of[r.arg1.as_str()], order_of[r.arg2.as_str()], r.label));
    for (i, r) in relations.iter_mut().enumerate() {
        r.id = format!("R{}", i + 1);
        r.arg1 = old_to_new[&r.arg1].clone();
        r.arg2 = old_to_new[&r.arg2].clone();
    }
    for (i, e) in entities.iter_mut().enumerate() {
        e.id = format!("T{}", i + 1);
    }

    Document {
        doc_id: doc.doc_id.clone(),
        title: doc.title.clone(),
        abstract_text: doc.abstract_text.clone(),
        entities,
        relations,
        provenance: doc.provenance.clone(),
        extra_ann: doc.extra_ann.clone(),
    }
}

/// Canonicalizes every document in a corpus.
pub fn canonicalize_corpus(corpus: &Corpus) -> Corpus {
    let mut out = Corpus::new(corpus.split);
    for doc in corpus.docs.values() {
        out.insert(canonicalize_document(doc));
    }
    out
}

/// Parses a conflict resolution table:
/// `doc_id TAB chem_start TAB chem_end TAB gene_start TAB gene_end TAB label`.
pub fn parse_resolution_file(
    content: &str,
) -> Result<HashMap<(String, Span, Span), RelationLabel>, MergeError> {
    let mut table = HashMap::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        let [doc_id, cs, ce, gs, ge, label] = parts.as_slice() else {
            return Err(MergeError::MalformedResolution {
                line: line_no,
                reason: "expected 6 tab-separated columns".into(),
            });
        };
        let parse_offset = |s: &str| -> Result<usize, MergeError> {
            s.parse().map_err(|_| MergeError::MalformedResolution {
                line: line_no,
                reason: format!("bad offset `{s}`"),
            })
        };
        let label: RelationLabel = label.parse().map_err(|e: String| {
            MergeError::MalformedResolution { line: line_no, reason: e }
        })?;
        table.insert(
            (
                doc_id.to_string(),
                Span::new(parse_offset(cs)?, parse_offset(ce)?),
                Span::new(parse_offset(gs)?, parse_offset(ge)?),
            ),
            label,
        );
    }
    Ok(table)
}

/// Emits the resolution-table TSV for a set of conflicts, choosing
/// `label_a` for each; a starting point for manual review.
pub fn emit_resolution_template(conflicts: &[ConflictRecord]) -> String {
    let mut out = String::new();
    for c in conflicts {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            c.doc_id, c.chem_start, c.chem_end, c.gene_start, c.gene_end, c.label_a
        ));
    }
    out
}

/// Corpus-level counts: documents, entities, relations, and relations per
/// group (fine labels mapped to their group first).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub entities: usize,
    pub relations: usize,
    pub per_group: BTreeMap<CprGroup, usize>,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats { documents: corpus.docs.len(), ..CorpusStats::default() };
    for doc in corpus.docs.values() {
        stats.entities += doc.entities.len();
        stats.relations += doc.relations.len();
        for r in &doc.relations {
            *stats.per_group.entry(label_to_group(r.label)).or_default() += 1;
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FineRelation, GeneSubtype, Split};

    fn entity(id: &str, etype: EntityType, start: usize, end: usize, surface: &str) -> Entity {
        Entity { id: id.into(), etype, span: Span::new(start, end), surface: surface.into() }
    }

    fn doc(doc_id: &str, rel_label: FineRelation) -> Document {
        let mut d = Document {
            doc_id: doc_id.into(),
            title: "Aspirin inhibits COX".into(),
            abstract_text: "Nothing else.".into(),
            ..Document::default()
        };
        d.entities = vec![
            entity("T1", EntityType::Chemical, 0, 7, "Aspirin"),
            entity("T2", EntityType::Gene(GeneSubtype::Normalizable), 17, 20, "COX"),
        ];
        d.relations = vec![Relation {
            id: "R1".into(),
            label: RelationLabel::Fine(rel_label),
            arg1: "T1".into(),
            arg2: "T2".into(),
        }];
        d.validate().unwrap();
        d
    }

    fn corpus_of(docs: Vec<Document>) -> Corpus {
        let mut c = Corpus::new(Split::Train);
        for d in docs {
            c.insert(d);
        }
        c
    }

    #[test]
    fn disjoint_corpora_union_without_conflicts() {
        let a = corpus_of(vec![doc("1", FineRelation::Inhibitor)]);
        let b = corpus_of(vec![doc("2", FineRelation::Activator)]);
        let (merged, report) = merge_corpora(&a, &b, &ConflictPolicy::Fail).unwrap();
        assert_eq!(merged.docs.len(), 2);
        assert_eq!((report.docs_only_a, report.docs_only_b, report.docs_shared), (1, 1, 0));
        assert!(report.conflicts.is_empty());
        // Exclusive documents are copied verbatim.
        assert_eq!(merged.docs["1"], a.docs["1"]);
        assert_eq!(merged.docs["2"], b.docs["2"]);
    }

    #[test]
    fn self_merge_is_identity_after_renumbering() {
        let mut d = doc("1", FineRelation::Inhibitor);
        // Non-canonical ids to show renumbering is the only change.
        d.entities[0].id = "T7".into();
        d.relations[0].arg1 = "T7".into();
        let c = corpus_of(vec![d, doc("2", FineRelation::Agonist)]);
        let (merged, report) = merge_corpora(&c, &c, &ConflictPolicy::Fail).unwrap();
        assert_eq!(merged, canonicalize_corpus(&c));
        assert!(report.conflicts.is_empty());
        assert_eq!(report.docs_shared, 2);
    }

    #[test]
    fn same_label_pairs_are_stored_once() {
        let a = corpus_of(vec![doc("1", FineRelation::Inhibitor)]);
        let b = corpus_of(vec![doc("1", FineRelation::Inhibitor)]);
        let (merged, report) = merge_corpora(&a, &b, &ConflictPolicy::Fail).unwrap();
        assert_eq!(merged.docs["1"].relations.len(), 1);
        assert!(report.conflicts.is_empty());
    }

    #[test]
    fn label_disagreement_is_a_conflict() {
        let a = corpus_of(vec![doc("1", FineRelation::Inhibitor)]);
        let b = corpus_of(vec![doc("1", FineRelation::Activator)]);

        let err = merge_corpora(&a, &b, &ConflictPolicy::Fail).unwrap_err();
        let MergeError::UnresolvedConflict { conflicts, .. } = err else {
            panic!("expected unresolved conflict");
        };
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].label_a, RelationLabel::Fine(FineRelation::Inhibitor));
        assert_eq!(conflicts[0].label_b, RelationLabel::Fine(FineRelation::Activator));

        let (merged, report) = merge_corpora(&a, &b, &ConflictPolicy::PreferA).unwrap();
        assert_eq!(report.conflicts.len(), 1);
        assert_eq!(
            merged.docs["1"].relations[0].label,
            RelationLabel::Fine(FineRelation::Inhibitor)
        );

        let (merged, _) = merge_corpora(&a, &b, &ConflictPolicy::PreferB).unwrap();
        assert_eq!(
            merged.docs["1"].relations[0].label,
            RelationLabel::Fine(FineRelation::Activator)
        );

        let (merged, report) = merge_corpora(&a, &b, &ConflictPolicy::Drop).unwrap();
        assert!(merged.docs["1"].relations.is_empty());
        assert_eq!(report.conflicts.len(), 1);
        // Entities survive a dropped pair.
        assert_eq!(merged.docs["1"].entities.len(), 2);
    }

    #[test]
    fn prefer_a_reflects_to_prefer_b() {
        let a = corpus_of(vec![doc("1", FineRelation::Inhibitor), doc("3", FineRelation::Substrate)]);
        let b = corpus_of(vec![doc("1", FineRelation::Activator), doc("2", FineRelation::Agonist)]);
        let (ab, _) = merge_corpora(&a, &b, &ConflictPolicy::PreferA).unwrap();
        let (ba, _) = merge_corpora(&b, &a, &ConflictPolicy::PreferB).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn resolution_file_settles_conflicts() {
        let a = corpus_of(vec![doc("1", FineRelation::Inhibitor)]);
        let b = corpus_of(vec![doc("1", FineRelation::Activator)]);

        let table = parse_resolution_file("1\t0\t7\t17\t20\tACTIVATOR\n").unwrap();
        let (merged, report) =
            merge_corpora(&a, &b, &ConflictPolicy::ResolutionFile(table)).unwrap();
        assert_eq!(report.conflicts.len(), 1);
        assert_eq!(
            merged.docs["1"].relations[0].label,
            RelationLabel::Fine(FineRelation::Activator)
        );

        // Uncovered conflicts fail the merge and are listed.
        let empty = HashMap::new();
        let err = merge_corpora(&a, &b, &ConflictPolicy::ResolutionFile(empty)).unwrap_err();
        assert!(matches!(err, MergeError::UnresolvedConflict { ref conflicts, .. } if conflicts.len() == 1));
    }

    #[test]
    fn resolution_template_round_trips() {
        let record = ConflictRecord {
            doc_id: "1".into(),
            chem_start: 0,
            chem_end: 7,
            gene_start: 17,
            gene_end: 20,
            label_a: RelationLabel::Fine(FineRelation::Inhibitor),
            label_b: RelationLabel::Fine(FineRelation::Activator),
        };
        let tsv = emit_resolution_template(&[record.clone()]);
        let table = parse_resolution_file(&tsv).unwrap();
        assert_eq!(table[&record.key()], record.label_a);
        assert!(parse_resolution_file("1\t0\t7\n").is_err());
        assert!(parse_resolution_file("1\t0\t7\t17\t20\tBOGUS\n").is_err());
    }

    #[test]
    fn entity_subtype_union_keeps_the_most_specific() {
        let mut a_doc = doc("1", FineRelation::Inhibitor);
        a_doc.entities[1].etype = EntityType::Gene(GeneSubtype::Unspecified);
        let a = corpus_of(vec![a_doc]);
        let b = corpus_of(vec![doc("1", FineRelation::Inhibitor)]);
        let (merged, _) = merge_corpora(&a, &b, &ConflictPolicy::Fail).unwrap();
        let gene = merged.docs["1"].entities.iter().find(|e| e.surface == "COX").unwrap();
        assert_eq!(gene.etype, EntityType::Gene(GeneSubtype::Normalizable));
    }

    #[test]
    fn provenance_tags_union() {
        let mut a_doc = doc("1", FineRelation::Inhibitor);
        a_doc.provenance.insert(crate::corpus::SourceTag::ChemProt);
        let mut b_doc = doc("1", FineRelation::Inhibitor);
        b_doc.provenance.insert(crate::corpus::SourceTag::DrugProt);
        let a = corpus_of(vec![a_doc]);
        let b = corpus_of(vec![b_doc]);
        let (merged, _) = merge_corpora(&a, &b, &ConflictPolicy::Fail).unwrap();
        assert_eq!(merged.docs["1"].provenance.len(), 2);
    }

    #[test]
    fn split_mismatch_is_rejected() {
        let a = corpus_of(vec![]);
        let mut b = corpus_of(vec![]);
        b.split = Split::Validation;
        assert!(matches!(
            merge_corpora(&a, &b, &ConflictPolicy::Fail),
            Err(MergeError::SplitMismatch { .. })
        ));
    }

    #[test]
    fn differing_document_text_is_a_mismatch_error() {
        let a = corpus_of(vec![doc("1", FineRelation::Inhibitor)]);
        let mut changed = doc("1", FineRelation::Inhibitor);
        changed.abstract_text = "Different text.".into();
        let b = corpus_of(vec![changed]);
        assert!(matches!(
            merge_corpora(&a, &b, &ConflictPolicy::Fail),
            Err(MergeError::EntityTextMismatch { .. })
        ));
    }

    #[test]
    fn merged_documents_satisfy_invariants_and_are_renumbered() {
        let mut a_doc = doc("1", FineRelation::Inhibitor);
        // Second chemical later in the text, annotated only in `a`.
        a_doc.entities.push(entity("T9", EntityType::Chemical, 21, 28, "Nothing"));
        a_doc.relations.push(Relation {
            id: "R4".into(),
            label: RelationLabel::Fine(FineRelation::Substrate),
            arg1: "T9".into(),
            arg2: "T2".into(),
        });
        a_doc.validate().unwrap();
        let a = corpus_of(vec![a_doc]);
        let b = corpus_of(vec![doc("1", FineRelation::Inhibitor)]);
        let (merged, _) = merge_corpora(&a, &b, &ConflictPolicy::Fail).unwrap();
        let m = &merged.docs["1"];
        m.validate().unwrap();
        let ids: Vec<&str> = m.entities.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["T1", "T2", "T3"]);
        let rids: Vec<&str> = m.relations.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(rids, vec!["R1", "R2"]);
        // Relations ordered by entity position: Aspirin->COX before Nothing->COX.
        assert_eq!(m.relations[0].arg1, "T1");
        assert_eq!(m.relations[1].arg1, "T3");
    }

    #[test]
    fn stats_count_relations_per_group() {
        let a = corpus_of(vec![doc("1", FineRelation::Inhibitor), doc("2", FineRelation::Activator)]);
        let stats = corpus_stats(&a);
        assert_eq!(stats.documents, 2);
        assert_eq!(stats.entities, 4);
        assert_eq!(stats.relations, 2);
        assert_eq!(stats.per_group[&CprGroup::Cpr4], 1);
        assert_eq!(stats.per_group[&CprGroup::Cpr3], 1);
    }
}
