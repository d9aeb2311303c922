//! Relation-instance generation and dataset assembly.
//!
//! The classification task is sentence-level: every chemical-gene pair
//! co-occurring in a sentence becomes one instance. Pairs with an annotated
//! relation keep its group label; pairs without one become synthetic
//! negatives labeled `CPR:10`. Relations whose arguments land in different
//! sentences produce no instance and are reported instead.
//!
//! Downstream steps are pure functions over the instance list: entity
//! masking (already applied at generation), negative downsampling, the
//! stratified train/validation split, and inverse-frequency class weights.
//! Both sampling steps are seeded through [`crate::detrand`] and are
//! reproducible byte for byte.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    assign_to_sentences, segment_sentences, Corpus, CprGroup, Entity, EntityRole,
    FineRelation, RelationInstance, RelationLabel, Sentence, Span,
};
use crate::detrand::{DetRng, Stream};

/// Maps a fine annotation label to its relation group.
pub fn map_to_cpr(fine: FineRelation) -> CprGroup {
    use FineRelation::*;
    match fine {
        PartOf => CprGroup::Cpr1,
        Regulator | DirectRegulator | IndirectRegulator => CprGroup::Cpr2,
        Upregulator | Activator | IndirectUpregulator => CprGroup::Cpr3,
        Downregulator | Inhibitor | IndirectDownregulator => CprGroup::Cpr4,
        Agonist | AgonistActivator | AgonistInhibitor => CprGroup::Cpr5,
        Antagonist => CprGroup::Cpr6,
        Modulator | ModulatorActivator | ModulatorInhibitor => CprGroup::Cpr7,
        Cofactor => CprGroup::Cpr8,
        Substrate | ProductOf | SubstrateProductOf => CprGroup::Cpr9,
        NoRelation => CprGroup::Cpr10,
    }
}

/// Group of a label at either granularity.
pub fn label_to_group(label: RelationLabel) -> CprGroup {
    match label {
        RelationLabel::Fine(f) => map_to_cpr(f),
        RelationLabel::Cpr(g) => g,
    }
}

/// How entity mentions are rewritten in instance text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Replace the pair under classification with type tokens.
    MaskTargets,
    /// Replace every entity in the sentence except the pair.
    MaskNonTargets,
    /// Leave the sentence untouched.
    NoMask,
}

/// Masking configuration: mode plus the replacement token per entity role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskStrategy {
    pub mode: MaskMode,
    pub chemical_token: String,
    pub gene_token: String,
}

impl Default for MaskStrategy {
    fn default() -> Self {
        MaskStrategy {
            mode: MaskMode::MaskTargets,
            chemical_token: "@CHEMICAL$".into(),
            gene_token: "@GENE$".into(),
        }
    }
}

impl MaskStrategy {
    pub fn with_mode(mode: MaskMode) -> Self {
        MaskStrategy { mode, ..MaskStrategy::default() }
    }

    fn token_for(&self, role: EntityRole) -> &str {
        match role {
            EntityRole::Chemical => &self.chemical_token,
            EntityRole::Gene => &self.gene_token,
        }
    }
}

/// Dataset preparation parameters. Deserialization fills missing fields
/// from the defaults and rejects unknown keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepConfig {
    /// Fraction of negative instances retained (`0.6` keeps 60%).
    pub downsample_ratio: f64,
    /// Fraction of each class sent to the training split.
    pub split_ratio: f64,
    pub seed: u64,
    /// Groups removed from the instance set after generation.
    pub excluded_groups: BTreeSet<CprGroup>,
    pub masking: MaskStrategy,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig {
            downsample_ratio: 0.6,
            split_ratio: 0.8,
            seed: 0,
            excluded_groups: [CprGroup::Cpr7, CprGroup::Cpr8].into(),
            masking: MaskStrategy::default(),
        }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<(), PrepError> {
        if !(0.0..=1.0).contains(&self.downsample_ratio) || !self.downsample_ratio.is_finite() {
            return Err(PrepError::InvalidRatio {
                name: "downsample_ratio",
                value: self.downsample_ratio,
                expected: "[0, 1]",
            });
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(PrepError::InvalidRatio {
                name: "split_ratio",
                value: self.split_ratio,
                expected: "(0, 1)",
            });
        }
        Ok(())
    }
}

/// A relation whose arguments do not share a sentence (or lie in no single
/// sentence at all). These produce no instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossSentenceEntry {
    pub doc_id: String,
    pub relation_id: String,
    pub label: CprGroup,
    pub chem_id: String,
    /// Sentence index of the chemical mention; `None` when the span crosses
    /// a sentence boundary.
    pub chem_sentence: Option<usize>,
    pub gene_id: String,
    pub gene_sentence: Option<usize>,
}

/// Relations excluded from instance generation, with their locations.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CrossSentenceReport {
    pub entries: Vec<CrossSentenceEntry>,
}

/// Errors from dataset preparation.
#[derive(Debug, Error)]
pub enum PrepError {
    #[error("{name} must be in {expected}, got {value}")]
    InvalidRatio { name: &'static str, value: f64, expected: &'static str },
    #[error("{doc_id}: masked spans {a} and {b} overlap")]
    OverlappingEntities { doc_id: String, a: Span, b: Span },
    #[error("{doc_id}: entity {id} lies outside the sentence being masked")]
    EntityOutsideSentence { doc_id: String, id: String },
    #[error("no instances to process")]
    EmptyInput,
    #[error("instances line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error(transparent)]
    Format(#[from] crate::formats::FormatError),
}

/// Generates one instance per same-sentence chemical-gene pair across the
/// corpus, masking each sentence according to `cfg.masking` and dropping
/// instances whose label is in `cfg.excluded_groups`.
///
/// Before exclusion, every sentence contributes exactly
/// `|chemicals| x |genes|` instances: annotated pairs keep their label (the
/// first relation in canonical order wins if a pair somehow carries
/// several), unannotated pairs become synthetic `CPR:10` negatives.
pub fn generate_instances(
    corpus: &Corpus,
    cfg: &PrepConfig,
) -> Result<(Vec<RelationInstance>, CrossSentenceReport), PrepError> {
    #[cfg(feature = "parallel")]
    return generate_instances_par(corpus, cfg);
    #[cfg(not(feature = "parallel"))]
    generate_instances_seq(corpus, cfg)
}

/// Sequential [`generate_instances`].
pub fn generate_instances_seq(
    corpus: &Corpus,
    cfg: &PrepConfig,
) -> Result<(Vec<RelationInstance>, CrossSentenceReport), PrepError> {
    generate_instances_impl(corpus, cfg, false)
}

/// Per-document-parallel [`generate_instances`]; documents are independent,
/// so the output is identical to the sequential form.
#[cfg(feature = "parallel")]
pub fn generate_instances_par(
    corpus: &Corpus,
    cfg: &PrepConfig,
) -> Result<(Vec<RelationInstance>, CrossSentenceReport), PrepError> {
    generate_instances_impl(corpus, cfg, true)
}

fn generate_instances_impl(
    corpus: &Corpus,
    cfg: &PrepConfig,
    parallel: bool,
) -> Result<(Vec<RelationInstance>, CrossSentenceReport), PrepError> {
    cfg.validate()?;

    let doc_results: Vec<Result<(Vec<RelationInstance>, Vec<CrossSentenceEntry>), PrepError>> = {
        let run = |doc: &crate::corpus::Document| generate_for_document(doc, cfg);
        if parallel {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                corpus.docs.values().collect::<Vec<_>>().par_iter().map(|d| run(d)).collect()
            }
            #[cfg(not(feature = "parallel"))]
            unreachable!("parallel generation requested without the `parallel` feature")
        } else {
            corpus.docs.values().map(run).collect()
        }
    };

    let mut instances = Vec::new();
    let mut report = CrossSentenceReport::default();
    for result in doc_results {
        let (mut doc_instances, mut entries) = result?;
        instances.append(&mut doc_instances);
        report.entries.append(&mut entries);
    }
    Ok((instances, report))
}

fn generate_for_document(
    doc: &crate::corpus::Document,
    cfg: &PrepConfig,
) -> Result<(Vec<RelationInstance>, Vec<CrossSentenceEntry>), PrepError> {
    let sentences = segment_sentences(doc);
    let assignment = assign_to_sentences(&doc.entities, &sentences);
    let sentence_of: HashMap<&str, Option<usize>> = doc
        .entities
        .iter()
        .zip(&assignment)
        .map(|(e, s)| (e.id.as_str(), *s))
        .collect();

    // First relation per (chem, gene) id pair wins; extras add nothing.
    let mut annotated: HashMap<(&str, &str), CprGroup> = HashMap::new();
    let mut cross = Vec::new();
    for rel in &doc.relations {
        let chem_sent = sentence_of.get(rel.arg1.as_str()).copied().flatten();
        let gene_sent = sentence_of.get(rel.arg2.as_str()).copied().flatten();
        match (chem_sent, gene_sent) {
            (Some(c), Some(g)) if c == g => {
                annotated
                    .entry((rel.arg1.as_str(), rel.arg2.as_str()))
                    .or_insert_with(|| label_to_group(rel.label));
            }
            _ => cross.push(CrossSentenceEntry {
                doc_id: doc.doc_id.clone(),
                relation_id: rel.id.clone(),
                label: label_to_group(rel.label),
                chem_id: rel.arg1.clone(),
                chem_sentence: chem_sent,
                gene_id: rel.arg2.clone(),
                gene_sentence: gene_sent,
            }),
        }
    }

    let mut instances = Vec::new();
    for (s_idx, sentence) in sentences.iter().enumerate() {
        let in_sentence: Vec<&Entity> = doc
            .entities
            .iter()
            .zip(&assignment)
            .filter(|(_, a)| **a == Some(s_idx))
            .map(|(e, _)| e)
            .collect();
        let chems: Vec<&Entity> =
            in_sentence.iter().copied().filter(|e| e.etype.role() == EntityRole::Chemical).collect();
        let genes: Vec<&Entity> =
            in_sentence.iter().copied().filter(|e| e.etype.role() == EntityRole::Gene).collect();

        for chem in &chems {
            for gene in &genes {
                let annotated_label = annotated.get(&(chem.id.as_str(), gene.id.as_str())).copied();
                let label = annotated_label.unwrap_or(CprGroup::NEGATIVE);
                if cfg.excluded_groups.contains(&label) {
                    continue;
                }
                let others: Vec<&Entity> = in_sentence
                    .iter()
                    .copied()
                    .filter(|e| e.id != chem.id && e.id != gene.id)
                    .collect();
                let masked_text =
                    mask_entities(sentence, chem, gene, &others, &cfg.masking)?;
                instances.push(RelationInstance {
                    doc_id: doc.doc_id.clone(),
                    sentence_index: s_idx,
                    chem_id: chem.id.clone(),
                    chem_start: chem.span.start,
                    chem_end: chem.span.end,
                    gene_id: gene.id.clone(),
                    gene_start: gene.span.start,
                    gene_end: gene.span.end,
                    label,
                    masked_text,
                    is_synthetic_negative: annotated_label.is_none(),
                });
            }
        }
    }
    Ok((instances, cross))
}

/// Rewrites a sentence with entity mentions replaced by type tokens.
/// Replacements run right to left so earlier spans stay valid. Masked spans
/// must not overlap each other and must lie inside the sentence.
pub fn mask_entities(
    sentence: &Sentence,
    chem: &Entity,
    gene: &Entity,
    others: &[&Entity],
    strategy: &MaskStrategy,
) -> Result<String, PrepError> {
    let to_mask: Vec<&Entity> = match strategy.mode {
        MaskMode::MaskTargets => vec![chem, gene],
        MaskMode::MaskNonTargets => others.to_vec(),
        MaskMode::NoMask => Vec::new(),
    };

    for e in &to_mask {
        if !e.span.within(&sentence.span) {
            return Err(PrepError::EntityOutsideSentence {
                doc_id: sentence.doc_id.clone(),
                id: e.id.clone(),
            });
        }
    }
    for (i, a) in to_mask.iter().enumerate() {
        for b in &to_mask[i + 1..] {
            if a.span.overlaps(&b.span) {
                return Err(PrepError::OverlappingEntities {
                    doc_id: sentence.doc_id.clone(),
                    a: a.span,
                    b: b.span,
                });
            }
        }
    }

    let mut sorted = to_mask;
    sorted.sort_by_key(|e| std::cmp::Reverse(e.span.start));

    let mut chars: Vec<char> = sentence.text.chars().collect();
    for e in sorted {
        let start = e.span.start - sentence.span.start;
        let end = e.span.end - sentence.span.start;
        let token: Vec<char> = strategy.token_for(e.etype.role()).chars().collect();
        chars.splice(start..end, token);
    }
    Ok(chars.into_iter().collect())
}

/// Keeps every non-negative instance and a seeded uniform sample of exactly
/// `floor(ratio * n_negatives)` negatives, preserving input order.
pub fn downsample_negatives(
    instances: &[RelationInstance],
    ratio: f64,
    seed: u64,
) -> Result<Vec<RelationInstance>, PrepError> {
    if !(0.0..=1.0).contains(&ratio) || !ratio.is_finite() {
        return Err(PrepError::InvalidRatio { name: "ratio", value: ratio, expected: "[0, 1]" });
    }
    let negative_positions: Vec<usize> = instances
        .iter()
        .enumerate()
        .filter(|(_, inst)| inst.label == CprGroup::NEGATIVE)
        .map(|(i, _)| i)
        .collect();
    let keep_count = (ratio * negative_positions.len() as f64).floor() as usize;
    let mut rng = DetRng::new(seed, Stream::Downsample);
    let chosen = rng.choose_indices(negative_positions.len(), keep_count);
    let kept: HashSet<usize> = chosen.iter().map(|&i| negative_positions[i]).collect();

    Ok(instances
        .iter()
        .enumerate()
        .filter(|(i, inst)| inst.label != CprGroup::NEGATIVE || kept.contains(i))
        .map(|(_, inst)| inst.clone())
        .collect())
}

/// Stratified train/validation split. Per class, a seeded shuffle sends
/// `floor(ratio * n_c)` instances (at least 1 when `n_c >= 2`) to train; a
/// class with a single instance goes to train whole. Outputs preserve input
/// order. Each class shuffles on its own RNG stream, so the assignment
/// within one class does not depend on the others.
pub fn stratified_split(
    instances: &[RelationInstance],
    split_ratio: f64,
    seed: u64,
) -> Result<(Vec<RelationInstance>, Vec<RelationInstance>), PrepError> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(PrepError::InvalidRatio {
            name: "split_ratio",
            value: split_ratio,
            expected: "(0, 1)",
        });
    }

    let mut train_set: HashSet<usize> = HashSet::new();
    for (class_idx, group) in CprGroup::ALL.iter().enumerate() {
        let members: Vec<usize> = instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.label == *group)
            .map(|(i, _)| i)
            .collect();
        let n_c = members.len();
        if n_c == 0 {
            continue;
        }
        if n_c == 1 {
            train_set.insert(members[0]);
            continue;
        }
        let take = ((split_ratio * n_c as f64).floor() as usize).max(1);
        let mut shuffled = members;
        DetRng::new(seed, Stream::SplitClass(class_idx as u64)).shuffle(&mut shuffled);
        train_set.extend(&shuffled[..take]);
    }

    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        if train_set.contains(&i) {
            train.push(inst.clone());
        } else {
            validation.push(inst.clone());
        }
    }
    Ok((train, validation))
}

/// Inverse-frequency class weights `w_c = N / (K * n_c)` over the classes
/// present, where `N` is the instance count and `K` the number of classes
/// with at least one instance. The weighted class sizes sum back to `N`.
pub fn class_weights(instances: &[RelationInstance]) -> Result<BTreeMap<CprGroup, f64>, PrepError> {
    if instances.is_empty() {
        return Err(PrepError::EmptyInput);
    }
    let mut counts: BTreeMap<CprGroup, usize> = BTreeMap::new();
    for inst in instances {
        *counts.entry(inst.label).or_default() += 1;
    }
    let n = instances.len() as f64;
    let k = counts.len() as f64;
    Ok(counts.into_iter().map(|(g, n_c)| (g, n / (k * n_c as f64))).collect())
}

// ---------------------------------------------------------------------------
// Instance serialization
// ---------------------------------------------------------------------------

/// Emits the TSV instance layout:
/// `doc_id TAB sentence_idx TAB chem_span TAB gene_span TAB label TAB masked_text`.
/// Spans format as `start-end`. The TSV does not carry entity ids or the
/// synthetic-negative flag; use the JSON layout when those matter.
pub fn emit_instances_tsv(instances: &[RelationInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            inst.doc_id,
            inst.sentence_index,
            inst.chem_span(),
            inst.gene_span(),
            inst.label,
            inst.masked_text
        ));
    }
    out
}

/// Parses the TSV instance layout. Entity ids are not recorded in the file
/// and come back empty; the synthetic flag is inferred from the label.
pub fn parse_instances_tsv(content: &str) -> Result<Vec<RelationInstance>, PrepError> {
    let mut instances = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(6, '\t').collect();
        let [doc_id, sent_idx, chem_span, gene_span, label, masked_text] = parts.as_slice() else {
            return Err(PrepError::MalformedRow {
                line: line_no,
                reason: "expected 6 tab-separated columns".into(),
            });
        };
        let bad = |reason: String| PrepError::MalformedRow { line: line_no, reason };
        let sentence_index: usize =
            sent_idx.parse().map_err(|_| bad(format!("bad sentence index `{sent_idx}`")))?;
        let (chem_start, chem_end) = parse_span(chem_span).ok_or_else(|| bad(format!("bad span `{chem_span}`")))?;
        let (gene_start, gene_end) = parse_span(gene_span).ok_or_else(|| bad(format!("bad span `{gene_span}`")))?;
        let label: CprGroup = label.parse().map_err(|e: String| bad(e))?;
        instances.push(RelationInstance {
            doc_id: doc_id.to_string(),
            sentence_index,
            chem_id: String::new(),
            chem_start,
            chem_end,
            gene_id: String::new(),
            gene_start,
            gene_end,
            label,
            masked_text: masked_text.to_string(),
            is_synthetic_negative: label == CprGroup::NEGATIVE,
        });
    }
    Ok(instances)
}

fn parse_span(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once('-')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Emits a corpus JSON document extended with an `"instances"` array, the
/// lossless instance layout.
pub fn emit_instances_json(corpus: &Corpus, instances: &[RelationInstance]) -> String {
    #[derive(Serialize)]
    struct Extended<'a> {
        split: &'a str,
        docs: serde_json::Value,
        instances: &'a [RelationInstance],
    }
    let base: serde_json::Value =
        serde_json::from_str(&crate::formats::json::emit_json_corpus(corpus))
            .expect("canonical corpus JSON is valid");
    let out = Extended {
        split: corpus.split.as_str(),
        docs: base.get("docs").cloned().unwrap_or_default(),
        instances,
    };
    serde_json::to_string(&out).expect("instance serialization cannot fail")
}

/// Parses the extended corpus-plus-instances JSON layout.
pub fn parse_instances_json(content: &str) -> Result<(Corpus, Vec<RelationInstance>), PrepError> {
    let violation = |path: &str, reason: &str| {
        PrepError::Format(crate::formats::FormatError::SchemaViolation {
            path: path.to_string(),
            reason: reason.to_string(),
        })
    };
    let mut root: serde_json::Value = serde_json::from_str(content)
        .map_err(|e| violation("(root)", &format!("invalid JSON: {e}")))?;
    let obj = root.as_object_mut().ok_or_else(|| violation("(root)", "expected an object"))?;
    let instances_val =
        obj.remove("instances").ok_or_else(|| violation("instances", "missing required field"))?;
    let instances: Vec<RelationInstance> = serde_json::from_value(instances_val)
        .map_err(|e| violation("instances", &e.to_string()))?;
    let base = serde_json::to_string(&root).expect("value reserialization cannot fail");
    let corpus = crate::formats::json::parse_json_corpus(&base)?;
    for (i, inst) in instances.iter().enumerate() {
        if !corpus.docs.contains_key(&inst.doc_id) {
            return Err(violation(
                &format!("instances[{i}].doc_id"),
                &format!("unknown document `{}`", inst.doc_id),
            ));
        }
    }
    Ok((corpus, instances))
}

/// Sanity statistics over an instance list: per-group counts.
pub fn instance_counts(instances: &[RelationInstance]) -> BTreeMap<CprGroup, usize> {
    let mut counts = BTreeMap::new();
    for inst in instances {
        *counts.entry(inst.label).or_default() += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, EntityType, GeneSubtype, Relation, Split};

    fn entity(id: &str, etype: EntityType, start: usize, end: usize, surface: &str) -> Entity {
        Entity { id: id.into(), etype, span: Span::new(start, end), surface: surface.into() }
    }

    /// One-doc corpus: title sentence has 1 chem x 2 genes with one
    /// annotated INHIBITOR pair; abstract sentence has 1 chem x 1 gene,
    /// unannotated; plus a cross-sentence AGONIST relation.
    fn sample_corpus() -> Corpus {
        let title = "Aspirin inhibits COX and SYK";
        let abstract_text = "Caffeine affects ADA2 strongly.";
        let mut doc = Document {
            doc_id: "10".into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            ..Document::default()
        };
        doc.entities = vec![
            entity("T1", EntityType::Chemical, 0, 7, "Aspirin"),
            entity("T2", EntityType::Gene(GeneSubtype::Normalizable), 17, 20, "COX"),
            entity("T3", EntityType::Gene(GeneSubtype::Normalizable), 25, 28, "SYK"),
            entity("T4", EntityType::Chemical, 29, 37, "Caffeine"),
            entity("T5", EntityType::Gene(GeneSubtype::NonNormalizable), 46, 50, "ADA2"),
        ];
        doc.relations = vec![
            Relation {
                id: "R1".into(),
                label: RelationLabel::Fine(FineRelation::Inhibitor),
                arg1: "T1".into(),
                arg2: "T2".into(),
            },
            Relation {
                id: "R2".into(),
                label: RelationLabel::Fine(FineRelation::Agonist),
                arg1: "T1".into(),
                arg2: "T5".into(),
            },
        ];
        doc.validate().unwrap();
        let mut corpus = Corpus::new(Split::Train);
        corpus.insert(doc);
        corpus
    }

    fn no_exclusion_config() -> PrepConfig {
        PrepConfig { excluded_groups: BTreeSet::new(), ..PrepConfig::default() }
    }

    #[test]
    fn cpr_mapping_covers_all_fine_labels() {
        use FineRelation::*;
        let expect = [
            (PartOf, CprGroup::Cpr1),
            (Regulator, CprGroup::Cpr2),
            (DirectRegulator, CprGroup::Cpr2),
            (IndirectRegulator, CprGroup::Cpr2),
            (Upregulator, CprGroup::Cpr3),
            (Activator, CprGroup::Cpr3),
            (IndirectUpregulator, CprGroup::Cpr3),
            (Downregulator, CprGroup::Cpr4),
            (Inhibitor, CprGroup::Cpr4),
            (IndirectDownregulator, CprGroup::Cpr4),
            (Agonist, CprGroup::Cpr5),
            (AgonistActivator, CprGroup::Cpr5),
            (AgonistInhibitor, CprGroup::Cpr5),
            (Antagonist, CprGroup::Cpr6),
            (Modulator, CprGroup::Cpr7),
            (ModulatorActivator, CprGroup::Cpr7),
            (ModulatorInhibitor, CprGroup::Cpr7),
            (Cofactor, CprGroup::Cpr8),
            (Substrate, CprGroup::Cpr9),
            (ProductOf, CprGroup::Cpr9),
            (SubstrateProductOf, CprGroup::Cpr9),
            (NoRelation, CprGroup::Cpr10),
        ];
        assert_eq!(expect.len(), FineRelation::ALL.len());
        for (fine, group) in expect {
            assert_eq!(map_to_cpr(fine), group, "{fine}");
        }
    }

    #[test]
    fn generates_positives_and_synthetic_negatives() {
        let corpus = sample_corpus();
        let (instances, report) = generate_instances(&corpus, &no_exclusion_config()).unwrap();
        // Title sentence: 1 chem x 2 genes = 2 instances; abstract: 1 x 1.
        assert_eq!(instances.len(), 3);
        let pos: Vec<_> = instances.iter().filter(|i| !i.is_synthetic_negative).collect();
        assert_eq!(pos.len(), 1);
        assert_eq!(pos[0].label, CprGroup::Cpr4);
        assert_eq!(pos[0].chem_id, "T1");
        assert_eq!(pos[0].gene_id, "T2");
        let negs: Vec<_> = instances.iter().filter(|i| i.is_synthetic_negative).collect();
        assert_eq!(negs.len(), 2);
        assert!(negs.iter().all(|i| i.label == CprGroup::Cpr10));
        // The cross-sentence AGONIST relation is reported, not silently lost.
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.entries[0].relation_id, "R2");
        assert_eq!(report.entries[0].label, CprGroup::Cpr5);
        assert_eq!(report.entries[0].chem_sentence, Some(0));
        assert_eq!(report.entries[0].gene_sentence, Some(1));
    }

    #[test]
    fn masking_replaces_target_pair() {
        let corpus = sample_corpus();
        let (instances, _) = generate_instances(&corpus, &no_exclusion_config()).unwrap();
        let pos = instances.iter().find(|i| !i.is_synthetic_negative).unwrap();
        assert_eq!(pos.masked_text, "@CHEMICAL$ inhibits @GENE$ and SYK");
        // The other pair in the same sentence masks SYK's slot instead.
        let neg = instances.iter().find(|i| i.gene_id == "T3").unwrap();
        assert_eq!(neg.masked_text, "@CHEMICAL$ inhibits COX and @GENE$");
    }

    #[test]
    fn mask_non_targets_replaces_everything_else() {
        let corpus = sample_corpus();
        let cfg = PrepConfig {
            masking: MaskStrategy::with_mode(MaskMode::MaskNonTargets),
            ..no_exclusion_config()
        };
        let (instances, _) = generate_instances(&corpus, &cfg).unwrap();
        let pos = instances.iter().find(|i| !i.is_synthetic_negative).unwrap();
        assert_eq!(pos.masked_text, "Aspirin inhibits COX and @GENE$");
        let cfg = PrepConfig {
            masking: MaskStrategy::with_mode(MaskMode::NoMask),
            ..no_exclusion_config()
        };
        let (instances, _) = generate_instances(&corpus, &cfg).unwrap();
        assert!(instances.iter().all(|i| !i.masked_text.contains('@')));
    }

    #[test]
    fn masking_example_from_module_contract() {
        let sentence = Sentence {
            doc_id: "d".into(),
            index: 0,
            span: Span::new(0, 21),
            text: "Aspirin inhibits COX.".into(),
        };
        let chem = entity("T1", EntityType::Chemical, 0, 7, "Aspirin");
        let gene = entity("T2", EntityType::Gene(GeneSubtype::Unspecified), 17, 20, "COX");
        let masked =
            mask_entities(&sentence, &chem, &gene, &[], &MaskStrategy::default()).unwrap();
        assert_eq!(masked, "@CHEMICAL$ inhibits @GENE$.");
    }

    #[test]
    fn overlapping_masked_spans_are_rejected() {
        let sentence = Sentence {
            doc_id: "d".into(),
            index: 0,
            span: Span::new(0, 16),
            text: "insulin receptor".into(),
        };
        let chem = entity("T1", EntityType::Chemical, 0, 7, "insulin");
        let gene = entity("T2", EntityType::Gene(GeneSubtype::Unspecified), 0, 16, "insulin receptor");
        let err =
            mask_entities(&sentence, &chem, &gene, &[], &MaskStrategy::default()).unwrap_err();
        assert!(matches!(err, PrepError::OverlappingEntities { .. }));
        // NoMask never inspects the spans, so the same pair passes.
        let ok = mask_entities(&sentence, &chem, &gene, &[], &MaskStrategy::with_mode(MaskMode::NoMask));
        assert!(ok.is_ok());
    }

    #[test]
    fn excluded_groups_are_dropped() {
        let corpus = sample_corpus();
        let cfg = PrepConfig {
            excluded_groups: [CprGroup::Cpr4].into(),
            ..no_exclusion_config()
        };
        let (instances, _) = generate_instances(&corpus, &cfg).unwrap();
        assert_eq!(instances.len(), 2);
        assert!(instances.iter().all(|i| i.label != CprGroup::Cpr4));
    }

    fn synthetic_instances(labels: &[CprGroup]) -> Vec<RelationInstance> {
        labels
            .iter()
            .enumerate()
            .map(|(i, label)| RelationInstance {
                doc_id: format!("d{i}"),
                sentence_index: 0,
                chem_id: "T1".into(),
                chem_start: 0,
                chem_end: 1,
                gene_id: "T2".into(),
                gene_start: 2,
                gene_end: 3,
                label: *label,
                masked_text: format!("text {i}"),
                is_synthetic_negative: *label == CprGroup::NEGATIVE,
            })
            .collect()
    }

    #[test]
    fn downsampling_keeps_floor_of_ratio_times_negatives() {
        use CprGroup::*;
        let labels = [Cpr10, Cpr3, Cpr10, Cpr10, Cpr4, Cpr10, Cpr10];
        let instances = synthetic_instances(&labels);
        let kept = downsample_negatives(&instances, 0.6, 11).unwrap();
        // floor(0.6 * 5) = 3 negatives, both positives retained.
        assert_eq!(kept.iter().filter(|i| i.label == Cpr10).count(), 3);
        assert_eq!(kept.iter().filter(|i| i.label != Cpr10).count(), 2);
        // Stable order: original relative order preserved.
        let docs: Vec<&str> = kept.iter().map(|i| i.doc_id.as_str()).collect();
        let mut sorted = docs.clone();
        sorted.sort_by_key(|d| d[1..].parse::<usize>().unwrap());
        assert_eq!(docs, sorted);
        // Same seed, same selection; different seed diverges eventually.
        assert_eq!(kept, downsample_negatives(&instances, 0.6, 11).unwrap());
    }

    #[test]
    fn downsample_ratio_bounds_are_enforced() {
        let instances = synthetic_instances(&[CprGroup::Cpr10]);
        assert!(downsample_negatives(&instances, 1.5, 0).is_err());
        assert!(downsample_negatives(&instances, -0.1, 0).is_err());
        assert_eq!(downsample_negatives(&instances, 0.0, 0).unwrap().len(), 0);
        assert_eq!(downsample_negatives(&instances, 1.0, 0).unwrap().len(), 1);
    }

    #[test]
    fn stratified_split_respects_floor_and_minimums() {
        use CprGroup::*;
        let mut labels = vec![Cpr3; 80];
        labels.extend(vec![Cpr4; 20]);
        labels.push(Cpr5); // singleton class goes to train
        let instances = synthetic_instances(&labels);
        let (train, val) = stratified_split(&instances, 0.8, 7).unwrap();
        assert_eq!(train.iter().filter(|i| i.label == Cpr3).count(), 64);
        assert_eq!(val.iter().filter(|i| i.label == Cpr3).count(), 16);
        assert_eq!(train.iter().filter(|i| i.label == Cpr4).count(), 16);
        assert_eq!(val.iter().filter(|i| i.label == Cpr4).count(), 4);
        assert_eq!(train.iter().filter(|i| i.label == Cpr5).count(), 1);
        assert_eq!(val.iter().filter(|i| i.label == Cpr5).count(), 0);
        assert_eq!(train.len() + val.len(), instances.len());
    }

    #[test]
    fn tiny_classes_keep_one_in_train() {
        use CprGroup::*;
        let instances = synthetic_instances(&[Cpr3, Cpr3]);
        // floor(0.5 * 2) = 1; both splits non-empty.
        let (train, val) = stratified_split(&instances, 0.5, 1).unwrap();
        assert_eq!((train.len(), val.len()), (1, 1));
        // floor(0.2 * 2) = 0, bumped to 1.
        let (train, val) = stratified_split(&instances, 0.2, 1).unwrap();
        assert_eq!((train.len(), val.len()), (1, 1));
    }

    #[test]
    fn split_is_seed_deterministic_and_disjoint() {
        use CprGroup::*;
        let labels: Vec<CprGroup> =
            (0..60).map(|i| if i % 3 == 0 { Cpr3 } else if i % 3 == 1 { Cpr9 } else { Cpr10 }).collect();
        let instances = synthetic_instances(&labels);
        let (t1, v1) = stratified_split(&instances, 0.8, 42).unwrap();
        let (t2, v2) = stratified_split(&instances, 0.8, 42).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(v1, v2);
        let (t3, _) = stratified_split(&instances, 0.8, 43).unwrap();
        assert_ne!(t1, t3);
        let mut all: Vec<String> = t1.iter().chain(&v1).map(|i| i.doc_id.clone()).collect();
        all.sort();
        let mut expect: Vec<String> = instances.iter().map(|i| i.doc_id.clone()).collect();
        expect.sort();
        assert_eq!(all, expect);
    }

    #[test]
    fn class_weights_match_inverse_frequency() {
        use CprGroup::*;
        let mut labels = vec![Cpr3; 10];
        labels.extend(vec![Cpr4; 30]);
        let instances = synthetic_instances(&labels);
        let weights = class_weights(&instances).unwrap();
        assert_eq!(weights.len(), 2);
        assert_eq!(weights[&Cpr3], 2.0);
        assert!((weights[&Cpr4] - 2.0 / 3.0).abs() < 1e-15);
        // Weighted sizes sum back to N.
        let total: f64 = weights.iter().map(|(g, w)| {
            w * labels.iter().filter(|l| *l == g).count() as f64
        }).sum();
        assert!((total - 40.0).abs() < 1e-12);
        assert!(matches!(class_weights(&[]), Err(PrepError::EmptyInput)));
    }

    #[test]
    fn instance_tsv_round_trips_the_recorded_columns() {
        let corpus = sample_corpus();
        let (instances, _) = generate_instances(&corpus, &no_exclusion_config()).unwrap();
        let tsv = emit_instances_tsv(&instances);
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("10\t0\t0-7\t17-20\tCPR:4\t"));
        let parsed = parse_instances_tsv(&tsv).unwrap();
        assert_eq!(parsed.len(), instances.len());
        for (p, i) in parsed.iter().zip(&instances) {
            assert_eq!(p.doc_id, i.doc_id);
            assert_eq!(p.sentence_index, i.sentence_index);
            assert_eq!(p.chem_span(), i.chem_span());
            assert_eq!(p.gene_span(), i.gene_span());
            assert_eq!(p.label, i.label);
            assert_eq!(p.masked_text, i.masked_text);
        }
        assert_eq!(emit_instances_tsv(&parsed), tsv);
    }

    #[test]
    fn instance_json_round_trips_losslessly() {
        let corpus = sample_corpus();
        let (instances, _) = generate_instances(&corpus, &no_exclusion_config()).unwrap();
        let json = emit_instances_json(&corpus, &instances);
        let (corpus2, instances2) = parse_instances_json(&json).unwrap();
        assert_eq!(corpus2, corpus);
        assert_eq!(instances2, instances);
        assert_eq!(emit_instances_json(&corpus2, &instances2), json);
    }

    #[test]
    fn malformed_instance_rows_are_located() {
        let err = parse_instances_tsv("10\t0\t0-7\t17-20\tCPR:4\n").unwrap_err();
        assert!(matches!(err, PrepError::MalformedRow { line: 1, .. }));
        let err = parse_instances_tsv("10\t0\t0-7\t17-20\tWRONG\ttext\n").unwrap_err();
        assert!(matches!(err, PrepError::MalformedRow { line: 1, .. }));
    }
}
