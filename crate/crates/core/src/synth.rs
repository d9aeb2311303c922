//! Seeded synthetic data for property tests and benchmarks.
//!
//! Every generator draws from a caller-supplied [`DetRng`], so a fixed seed
//! always produces the same documents, corpora, matrices, and label
//! sequences. Generated documents satisfy every [`Document::validate`]
//! invariant, carry canonical annotation ids, and never contain overlapping
//! entity spans, which keeps them valid inputs for instance generation under
//! any masking mode.

use std::collections::BTreeMap;

use crate::corpus::{
    CprGroup, Document, Entity, EntityType, FineRelation, GeneSubtype, Relation, RelationLabel,
    Span, Split,
};
use crate::detrand::DetRng;
use crate::graph::{VocabGraph, Vocabulary};
use crate::matrix::DenseMatrix;
use crate::merge::canonicalize_document;
use crate::{corpus::Corpus, gcn::VgcnParams};

const FILLERS: &[&str] = &[
    "binds", "affects", "blocks", "weakly", "strongly", "pathway", "receptor", "dose",
    "response", "observed", "cells", "vitro", "assay", "signal",
];

fn rand_index(rng: &mut DetRng, len: usize) -> usize {
    rng.below(len as u64) as usize
}

fn chance(rng: &mut DetRng, percent: u64) -> bool {
    rng.below(100) < percent
}

/// Random lowercase filler word.
fn filler(rng: &mut DetRng) -> String {
    FILLERS[rand_index(rng, FILLERS.len())].to_string()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Entity surface: uppercase head so a sentence may open with it.
fn mention(rng: &mut DetRng, prefix: &str) -> String {
    format!("{prefix}{}", rng.below(10_000))
}

struct TextBuilder {
    text: String,
    entities: Vec<Entity>,
    /// Entity indices per sentence, split chemicals/genes.
    sentences: Vec<(Vec<usize>, Vec<usize>)>,
}

impl TextBuilder {
    fn new() -> Self {
        TextBuilder { text: String::new(), entities: Vec::new(), sentences: Vec::new() }
    }

    /// Appends one sentence of `tokens` words; the first token is always
    /// uppercase so the preceding boundary is detectable.
    fn push_sentence(&mut self, rng: &mut DetRng, tokens: usize, terminator: Option<char>) {
        let mut chems = Vec::new();
        let mut genes = Vec::new();
        for t in 0..tokens {
            if t > 0 {
                self.text.push(' ');
            }
            let roll = rng.below(10);
            if roll < 2 {
                self.push_entity(rng, EntityType::Chemical, &mut chems);
            } else if roll < 4 {
                let subtype = match rng.below(3) {
                    0 => GeneSubtype::Unspecified,
                    1 => GeneSubtype::Normalizable,
                    _ => GeneSubtype::NonNormalizable,
                };
                self.push_entity(rng, EntityType::Gene(subtype), &mut genes);
            } else {
                let word = filler(rng);
                self.text.push_str(&if t == 0 { capitalize(&word) } else { word });
            }
        }
        if let Some(term) = terminator {
            self.text.push(term);
        }
        self.sentences.push((chems, genes));
    }

    fn push_entity(&mut self, rng: &mut DetRng, etype: EntityType, bucket: &mut Vec<usize>) {
        let prefix = match etype {
            EntityType::Chemical => "Chem",
            EntityType::Gene(_) => "Gene",
        };
        let surface = mention(rng, prefix);
        let start = self.text.chars().count();
        self.text.push_str(&surface);
        bucket.push(self.entities.len());
        self.entities.push(Entity {
            id: format!("T{}", self.entities.len() + 1),
            etype,
            span: Span::new(start, start + surface.chars().count()),
            surface,
        });
    }
}

/// Random valid document: a one-sentence title, one to three abstract
/// sentences, entities with exact spans, same-sentence relations on roughly
/// a third of chemical-gene pairs, and occasional cross-sentence relations
/// and preserved annotation lines. Ids are canonical.
pub fn rand_document(rng: &mut DetRng, doc_id: &str) -> Document {
    let mut builder = TextBuilder::new();
    let title_tokens = 3 + rand_index(rng, 6);
    let title_terminator = chance(rng, 50).then_some('.');
    builder.push_sentence(rng, title_tokens, title_terminator);
    let title = std::mem::take(&mut builder.text);
    let title_sentences = builder.sentences.len();

    for _ in 0..1 + rand_index(rng, 3) {
        if !builder.text.is_empty() {
            builder.text.push(' ');
        }
        let tokens = 3 + rand_index(rng, 7);
        builder.push_sentence(rng, tokens, Some('.'));
    }

    // Title entity offsets are already correct; abstract entities were laid
    // out in one continuous string, but the document text inserts a tab
    // after the title, which `full_text` models as one extra character.
    // Building title and abstract through one builder avoids that bookkeeping
    // only if the tab is accounted for; instead entities were built per
    // segment, so shift abstract-entity spans by title length + 1.
    let title_len = title.chars().count();
    let title_entity_count =
        builder.sentences[..title_sentences].iter().map(|(c, g)| c.len() + g.len()).sum::<usize>();
    for entity in &mut builder.entities[title_entity_count..] {
        entity.span = Span::new(entity.span.start + title_len + 1, entity.span.end + title_len + 1);
    }

    let mut relations = Vec::new();
    for (chems, genes) in &builder.sentences {
        for &c in chems {
            for &g in genes {
                if chance(rng, 35) {
                    relations.push((c, g));
                }
            }
        }
    }
    // Cross-sentence relations between distinct sentences.
    if builder.sentences.len() > 1 && chance(rng, 40) {
        let all_chems: Vec<(usize, usize)> = builder
            .sentences
            .iter()
            .enumerate()
            .flat_map(|(s, (c, _))| c.iter().map(move |&i| (s, i)))
            .collect();
        let all_genes: Vec<(usize, usize)> = builder
            .sentences
            .iter()
            .enumerate()
            .flat_map(|(s, (_, g))| g.iter().map(move |&i| (s, i)))
            .collect();
        if !all_chems.is_empty() && !all_genes.is_empty() {
            let (cs, c) = all_chems[rand_index(rng, all_chems.len())];
            let (gs, g) = all_genes[rand_index(rng, all_genes.len())];
            if cs != gs && !relations.contains(&(c, g)) {
                relations.push((c, g));
            }
        }
    }

    let relations = relations
        .into_iter()
        .enumerate()
        .map(|(i, (c, g))| Relation {
            id: format!("R{}", i + 1),
            label: RelationLabel::Fine(rand_fine_label(rng)),
            arg1: builder.entities[c].id.clone(),
            arg2: builder.entities[g].id.clone(),
        })
        .collect();

    let mut extra_ann = Vec::new();
    if chance(rng, 20) {
        extra_ann.push(format!("#{}\tAnnotatorNotes T1\tsynthetic note", rng.below(90) + 10));
    }
    if chance(rng, 10) {
        extra_ann.push(format!("A{}\tSpeculation R1", rng.below(9) + 1));
    }

    let doc = Document {
        doc_id: doc_id.to_string(),
        title,
        abstract_text: builder.text,
        entities: builder.entities,
        relations,
        provenance: Default::default(),
        extra_ann,
    };
    let doc = canonicalize_document(&doc);
    doc.validate().expect("generated document must satisfy the corpus invariants");
    doc
}

pub fn rand_fine_label(rng: &mut DetRng) -> FineRelation {
    FineRelation::ALL[rand_index(rng, FineRelation::ALL.len())]
}

/// Random corpus of `docs` documents with distinct numeric ids.
pub fn rand_corpus(rng: &mut DetRng, split: Split, docs: usize) -> Corpus {
    let mut corpus = Corpus::new(split);
    for i in 0..docs {
        corpus.insert(rand_document(rng, &format!("{}", 1000 + i)));
    }
    corpus
}

/// Two corpora over a partially shared document set with a known number of
/// relation-label conflicts, for merge property checks.
///
/// Shared documents agree on text and entity spans (gene subtypes may
/// differ), while each annotated pair is kept in both sources, kept in one,
/// or deliberately relabeled in the second source; the count of relabeled
/// pairs is returned. Source provenance tags are ChemProt for `a` and
/// DrugProt for `b`.
pub fn rand_corpus_pair(rng: &mut DetRng) -> (Corpus, Corpus, usize) {
    let mut a = Corpus::new(Split::Train);
    let mut b = Corpus::new(Split::Train);
    let mut conflicts = 0;

    for i in 0..rand_index(rng, 4) {
        let mut doc = rand_document(rng, &format!("{}", 100 + i));
        doc.provenance.insert(crate::corpus::SourceTag::ChemProt);
        a.insert(doc);
    }
    for i in 0..rand_index(rng, 4) {
        let mut doc = rand_document(rng, &format!("{}", 200 + i));
        doc.provenance.insert(crate::corpus::SourceTag::DrugProt);
        b.insert(doc);
    }

    for i in 0..1 + rand_index(rng, 5) {
        let base = rand_document(rng, &format!("{}", 300 + i));
        let mut rel_a = Vec::new();
        let mut rel_b = Vec::new();
        for rel in &base.relations {
            match rng.below(100) {
                0..=49 => {
                    rel_a.push(rel.clone());
                    rel_b.push(rel.clone());
                }
                50..=64 => rel_a.push(rel.clone()),
                65..=79 => rel_b.push(rel.clone()),
                _ => {
                    let mut other = rel.clone();
                    while other.label == rel.label {
                        other.label = RelationLabel::Fine(rand_fine_label(rng));
                    }
                    rel_a.push(rel.clone());
                    rel_b.push(other);
                    conflicts += 1;
                }
            }
        }

        let mut doc_a = base.clone();
        doc_a.relations = rel_a;
        doc_a.provenance.insert(crate::corpus::SourceTag::ChemProt);

        let mut doc_b = base;
        doc_b.relations = rel_b;
        doc_b.provenance.insert(crate::corpus::SourceTag::DrugProt);
        for entity in &mut doc_b.entities {
            if matches!(entity.etype, EntityType::Gene(_)) && chance(rng, 25) {
                entity.etype = EntityType::Gene(match rng.below(3) {
                    0 => GeneSubtype::Unspecified,
                    1 => GeneSubtype::Normalizable,
                    _ => GeneSubtype::NonNormalizable,
                });
            }
        }
        if chance(rng, 30) {
            doc_b.extra_ann.push("#99\tAnnotatorNotes T1\tsecond source note".to_string());
        }

        a.insert(canonicalize_document(&doc_a));
        b.insert(canonicalize_document(&doc_b));
    }
    (a, b, conflicts)
}

/// Tokenized documents over a small alphabet, for window-count oracles.
pub fn rand_token_docs(rng: &mut DetRng, max_docs: usize, max_tokens: usize) -> Vec<Vec<String>> {
    let alphabet: Vec<String> = (0..8).map(|i| format!("w{i}")).collect();
    (0..1 + rand_index(rng, max_docs))
        .map(|_| {
            (0..1 + rand_index(rng, max_tokens))
                .map(|_| alphabet[rand_index(rng, alphabet.len())].clone())
                .collect()
        })
        .collect()
}

/// Uniform random matrix over `[lo, hi)`.
pub fn rand_dense(rng: &mut DetRng, rows: usize, cols: usize, lo: f64, hi: f64) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| lo + rng.unit_f64() * (hi - lo)).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("generated data has the right length")
}

/// Matrix whose entries have magnitude in `[0.1, 1.1)` and random sign, so
/// finite-difference probes never straddle a near-zero value.
pub fn rand_signed_dense(rng: &mut DetRng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| {
            let magnitude = 0.1 + rng.unit_f64();
            if rng.below(2) == 0 {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("generated data has the right length")
}

/// One gradient-check instance.
pub struct GcnInstance {
    pub x: DenseMatrix,
    pub a_norm: DenseMatrix,
    pub params: VgcnParams,
    pub upstream: DenseMatrix,
}

/// Random instance with dims in `1..=max_dim`, resampled until every hidden
/// pre-activation is at least 1e-3 in magnitude: central differences with
/// step 1e-5 must not cross a ReLU kink.
pub fn rand_gcn_instance(rng: &mut DetRng, max_dim: usize) -> GcnInstance {
    loop {
        let m = 1 + rand_index(rng, max_dim);
        let v = 1 + rand_index(rng, max_dim);
        let h = 1 + rand_index(rng, max_dim);
        let c = 1 + rand_index(rng, max_dim);
        let x = rand_signed_dense(rng, m, v);
        let a_norm = rand_signed_dense(rng, v, v);
        let params =
            VgcnParams { w_vh: rand_signed_dense(rng, v, h), w_hc: rand_signed_dense(rng, h, c) };
        let upstream = rand_signed_dense(rng, m, c);
        let pre = x
            .matmul(&a_norm)
            .and_then(|z| z.matmul(&params.w_vh))
            .expect("generated dimensions are consistent");
        if pre.data().iter().all(|p| p.abs() > 1e-3) {
            return GcnInstance { x, a_norm, params, upstream };
        }
    }
}

/// Random vocabulary graph with up to `max_nodes` nodes and edge
/// probability ~30%, weights in `(0, 1]`.
pub fn rand_graph(rng: &mut DetRng, max_nodes: usize) -> VocabGraph {
    let n = 1 + rand_index(rng, max_nodes);
    let vocab = Vocabulary::from_tokens((0..n).map(|i| format!("n{i:02}")));
    let mut edges = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            if chance(rng, 30) {
                edges.insert((i, j), 1.0 - rng.unit_f64());
            }
        }
    }
    VocabGraph::from_parts(vocab, edges, 20).expect("generated edges satisfy the invariants")
}

/// Random label sequence over the first `classes` relation groups.
pub fn rand_labels(rng: &mut DetRng, len: usize, classes: usize) -> Vec<CprGroup> {
    (0..len).map(|_| CprGroup::ALL[rand_index(rng, classes.clamp(1, CprGroup::ALL.len()))]).collect()
}
