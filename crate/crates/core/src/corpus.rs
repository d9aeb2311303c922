//! Document model for chemical-gene relation corpora.
//!
//! A [`Document`] is a PubMed abstract with standoff annotations: typed
//! entity mentions addressed by character span, and directed relations from
//! a chemical mention to a gene mention. The annotated text is the title and
//! abstract joined by a single tab, and every span counts Unicode scalar
//! values over that joined text, so offsets survive serialization in any of
//! the supported formats.
//!
//! Relation labels come in two granularities: the fine annotation labels
//! ([`FineRelation`], 22 of them) and the coarse groups used for modeling
//! ([`CprGroup`], 10 of them, `CPR:10` being "no relation"). A [`Relation`]
//! may carry either.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Character span `[start, end)` counted in Unicode scalar values over the
/// document's full text (`title`, tab, `abstract`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// True when `self` lies entirely inside `other`.
    pub fn within(&self, other: &Span) -> bool {
        self.start >= other.start && self.end <= other.end
    }

    /// True when the two spans share at least one character position.
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Gene mentions in the source corpora distinguish whether the mention is
/// normalizable to a database identifier (`GENE-Y`) or not (`GENE-N`); some
/// exports collapse both to plain `GENE`. The distinction is preserved so
/// emitted files match their inputs byte for byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneSubtype {
    Unspecified,
    Normalizable,
    NonNormalizable,
}

/// Entity mention type. Only two roles exist in this task; gene subtypes are
/// an attribute, not a third role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityType {
    Chemical,
    Gene(GeneSubtype),
}

impl EntityType {
    /// Role with gene subtypes collapsed; alignment and pairing use this.
    pub fn role(&self) -> EntityRole {
        match self {
            EntityType::Chemical => EntityRole::Chemical,
            EntityType::Gene(_) => EntityRole::Gene,
        }
    }

    /// Annotation-file spelling (`CHEMICAL`, `GENE`, `GENE-Y`, `GENE-N`).
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityType::Chemical => "CHEMICAL",
            EntityType::Gene(GeneSubtype::Unspecified) => "GENE",
            EntityType::Gene(GeneSubtype::Normalizable) => "GENE-Y",
            EntityType::Gene(GeneSubtype::NonNormalizable) => "GENE-N",
        }
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CHEMICAL" => Ok(EntityType::Chemical),
            "GENE" => Ok(EntityType::Gene(GeneSubtype::Unspecified)),
            "GENE-Y" => Ok(EntityType::Gene(GeneSubtype::Normalizable)),
            "GENE-N" => Ok(EntityType::Gene(GeneSubtype::NonNormalizable)),
            other => Err(format!("unknown entity type `{other}`")),
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Entity role with gene subtypes collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityRole {
    Chemical,
    Gene,
}

/// One entity mention. `surface` must equal the text slice at `span`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    /// Annotation id of the form `T<digits>`, unique within a document.
    pub id: String,
    pub etype: EntityType,
    pub span: Span,
    pub surface: String,
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(concat!("unknown ", stringify!($name), " `{}`"), other)),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl serde::Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> serde::Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_enum! {
    /// The 22 fine-grained annotation labels.
    FineRelation {
        PartOf => "PART_OF",
        Regulator => "REGULATOR",
        DirectRegulator => "DIRECT_REGULATOR",
        IndirectRegulator => "INDIRECT_REGULATOR",
        Upregulator => "UPREGULATOR",
        Activator => "ACTIVATOR",
        IndirectUpregulator => "INDIRECT_UPREGULATOR",
        Downregulator => "DOWNREGULATOR",
        Inhibitor => "INHIBITOR",
        IndirectDownregulator => "INDIRECT_DOWNREGULATOR",
        Agonist => "AGONIST",
        AgonistActivator => "AGONIST_ACTIVATOR",
        AgonistInhibitor => "AGONIST_INHIBITOR",
        Antagonist => "ANTAGONIST",
        Modulator => "MODULATOR",
        ModulatorActivator => "MODULATOR_ACTIVATOR",
        ModulatorInhibitor => "MODULATOR_INHIBITOR",
        Cofactor => "COFACTOR",
        Substrate => "SUBSTRATE",
        ProductOf => "PRODUCT_OF",
        SubstrateProductOf => "SUBSTRATE_PRODUCT_OF",
        NoRelation => "NO_RELATION",
    }
}

string_enum! {
    /// The 10 chemical-protein relation groups used for modeling.
    /// `Cpr10` is the negative ("no relation") class.
    CprGroup {
        Cpr1 => "CPR:1",
        Cpr2 => "CPR:2",
        Cpr3 => "CPR:3",
        Cpr4 => "CPR:4",
        Cpr5 => "CPR:5",
        Cpr6 => "CPR:6",
        Cpr7 => "CPR:7",
        Cpr8 => "CPR:8",
        Cpr9 => "CPR:9",
        Cpr10 => "CPR:10",
    }
}

impl CprGroup {
    /// The negative class: no relation between the pair.
    pub const NEGATIVE: CprGroup = CprGroup::Cpr10;

    /// Dense 0-based index in canonical order.
    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|g| g == self).unwrap()
    }
}

string_enum! {
    /// Which source corpus a document came from.
    SourceTag {
        ChemProt => "ChemProt",
        DrugProt => "DrugProt",
        Merged => "Merged",
    }
}

/// A relation label at either granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationLabel {
    Fine(FineRelation),
    Cpr(CprGroup),
}

impl RelationLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelationLabel::Fine(r) => r.as_str(),
            RelationLabel::Cpr(g) => g.as_str(),
        }
    }
}

impl FromStr for RelationLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(fine) = s.parse::<FineRelation>() {
            return Ok(RelationLabel::Fine(fine));
        }
        if let Ok(group) = s.parse::<CprGroup>() {
            return Ok(RelationLabel::Cpr(group));
        }
        Err(format!("unknown relation label `{s}`"))
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl serde::Serialize for RelationLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for RelationLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Directed relation from a chemical mention (`arg1`) to a gene mention
/// (`arg2`), both referenced by entity id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    /// Annotation id of the form `R<digits>`, unique within a document.
    pub id: String,
    pub label: RelationLabel,
    pub arg1: String,
    pub arg2: String,
}

/// One annotated abstract.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub abstract_text: String,
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    /// Source corpora this document's annotations came from.
    pub provenance: BTreeSet<SourceTag>,
    /// Annotation lines of kinds this crate does not model (notes, events,
    /// attributes). Preserved verbatim so emitted files stay complete.
    pub extra_ann: Vec<String>,
}

impl Document {
    /// The annotated text: title and abstract joined by one tab.
    pub fn full_text(&self) -> String {
        let mut text = String::with_capacity(self.title.len() + 1 + self.abstract_text.len());
        text.push_str(&self.title);
        text.push('\t');
        text.push_str(&self.abstract_text);
        text
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// Checks every structural invariant: well-formed non-empty spans inside
    /// the text, surfaces matching their slice, unique ids, relation
    /// arguments resolving to a chemical (`arg1`) and a gene (`arg2`), and
    /// no duplicate `(arg1, arg2, label)` triple.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let text = self.full_text();
        let n_chars = text.chars().count();
        let mut ids = HashSet::new();
        for e in &self.entities {
            if e.span.is_empty() {
                return Err(CorpusError::InvalidSpan {
                    doc_id: self.doc_id.clone(),
                    id: e.id.clone(),
                    span: e.span,
                });
            }
            if e.span.end > n_chars {
                return Err(CorpusError::SpanOutOfBounds {
                    doc_id: self.doc_id.clone(),
                    id: e.id.clone(),
                    span: e.span,
                    len: n_chars,
                });
            }
            let slice = char_slice(&text, e.span).expect("span bounds checked above");
            if slice != e.surface {
                return Err(CorpusError::SurfaceMismatch {
                    doc_id: self.doc_id.clone(),
                    id: e.id.clone(),
                    expected: slice.to_string(),
                    found: e.surface.clone(),
                });
            }
            if !ids.insert(e.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    doc_id: self.doc_id.clone(),
                    id: e.id.clone(),
                });
            }
        }
        let mut rel_ids = HashSet::new();
        let mut triples = HashSet::new();
        for r in &self.relations {
            if !rel_ids.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    doc_id: self.doc_id.clone(),
                    id: r.id.clone(),
                });
            }
            let arg1 = self.entity(&r.arg1).ok_or_else(|| CorpusError::DanglingReference {
                doc_id: self.doc_id.clone(),
                relation: r.id.clone(),
                entity: r.arg1.clone(),
            })?;
            let arg2 = self.entity(&r.arg2).ok_or_else(|| CorpusError::DanglingReference {
                doc_id: self.doc_id.clone(),
                relation: r.id.clone(),
                entity: r.arg2.clone(),
            })?;
            if arg1.etype.role() != EntityRole::Chemical || arg2.etype.role() != EntityRole::Gene {
                return Err(CorpusError::ArgRoleViolation {
                    doc_id: self.doc_id.clone(),
                    relation: r.id.clone(),
                });
            }
            if !triples.insert((r.arg1.as_str(), r.arg2.as_str(), r.label)) {
                return Err(CorpusError::DuplicateRelation {
                    doc_id: self.doc_id.clone(),
                    relation: r.id.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Corpus split identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A set of documents from one split, keyed by `doc_id`. The map is ordered
/// so iteration (and therefore every emitted file) is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub split: Split,
    pub docs: std::collections::BTreeMap<String, Document>,
}

impl Corpus {
    pub fn new(split: Split) -> Self {
        Corpus { split, docs: std::collections::BTreeMap::new() }
    }

    pub fn insert(&mut self, doc: Document) {
        self.docs.insert(doc.doc_id.clone(), doc);
    }

    /// Validates every document. The first failure is returned.
    pub fn validate(&self) -> Result<(), CorpusError> {
        for doc in self.docs.values() {
            doc.validate()?;
        }
        Ok(())
    }
}

/// One segmented sentence of a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub doc_id: String,
    /// 0-based position within the document.
    pub index: usize,
    /// Span over the document's full text, trimmed of surrounding whitespace.
    pub span: Span,
    pub text: String,
}

/// One classification instance: a same-sentence chemical-gene pair.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RelationInstance {
    pub doc_id: String,
    pub sentence_index: usize,
    pub chem_id: String,
    pub chem_start: usize,
    pub chem_end: usize,
    pub gene_id: String,
    pub gene_start: usize,
    pub gene_end: usize,
    pub label: CprGroup,
    pub masked_text: String,
    /// True when the pair had no annotated relation and the negative label
    /// was generated, false for annotated relations (including annotated
    /// negatives).
    pub is_synthetic_negative: bool,
}

impl RelationInstance {
    pub fn chem_span(&self) -> Span {
        Span::new(self.chem_start, self.chem_end)
    }

    pub fn gene_span(&self) -> Span {
        Span::new(self.gene_start, self.gene_end)
    }
}

/// Errors for structural invariant violations.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{doc_id}: entity {id} has empty span {span}")]
    InvalidSpan { doc_id: String, id: String, span: Span },
    #[error("{doc_id}: entity {id} span {span} exceeds text length {len}")]
    SpanOutOfBounds { doc_id: String, id: String, span: Span, len: usize },
    #[error("{doc_id}: entity {id} surface `{found}` does not match text `{expected}`")]
    SurfaceMismatch { doc_id: String, id: String, expected: String, found: String },
    #[error("{doc_id}: duplicate annotation id {id}")]
    DuplicateId { doc_id: String, id: String },
    #[error("{doc_id}: relation {relation} references missing entity {entity}")]
    DanglingReference { doc_id: String, relation: String, entity: String },
    #[error("{doc_id}: relation {relation} must point from a chemical to a gene")]
    ArgRoleViolation { doc_id: String, relation: String },
    #[error("{doc_id}: relation {relation} duplicates an (arg1, arg2, label) triple")]
    DuplicateRelation { doc_id: String, relation: String },
}

/// Slices `text` by character (Unicode scalar) offsets. Returns `None` when
/// the span exceeds the text.
pub fn char_slice(text: &str, span: Span) -> Option<&str> {
    if span.end < span.start {
        return None;
    }
    let mut iter = text.char_indices();
    let byte_start = if span.start == 0 {
        0
    } else {
        iter.nth(span.start - 1).map(|(i, c)| i + c.len_utf8())?
    };
    let mut rest = text[byte_start..].char_indices();
    let byte_end = if span.end == span.start {
        byte_start
    } else {
        rest.nth(span.end - span.start - 1)
            .map(|(i, c)| byte_start + i + c.len_utf8())?
    };
    Some(&text[byte_start..byte_end])
}

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

// ---------------------------------------------------------------------------
// Sentence segmentation
// ---------------------------------------------------------------------------

/// Words that end with a sentence terminator without ending a sentence.
/// Compared case-insensitively against the token ending at the terminator;
/// "al." additionally requires a preceding "et".
const ABBREVIATIONS: &[&str] = &["fig.", "i.e.", "e.g.", "vs."];

/// Splits a document into sentences.
///
/// The title is always its own segment (the tab joining title and abstract
/// is a hard boundary). Within a segment, a sentence ends after `.`, `?`, or
/// `!` when the terminator is followed by whitespace and the next
/// non-whitespace character is an uppercase letter or a digit, unless the
/// word ending at the terminator is a known abbreviation ("Fig.", "et al.",
/// "i.e.", "e.g.", "vs."). Sentence spans are trimmed of surrounding
/// whitespace, so their union covers exactly the non-whitespace text.
pub fn segment_sentences(doc: &Document) -> Vec<Sentence> {
    let text = doc.full_text();
    let chars: Vec<char> = text.chars().collect();
    let title_len = char_len(&doc.title);

    let mut sentences = Vec::new();
    // The tab sits at `title_len`; segment each side independently.
    segment_range(doc, &chars, 0, title_len, &mut sentences);
    segment_range(doc, &chars, title_len + 1, chars.len(), &mut sentences);
    sentences
}

fn segment_range(
    doc: &Document,
    chars: &[char],
    from: usize,
    to: usize,
    out: &mut Vec<Sentence>,
) {
    let mut start = from;
    let mut i = from;
    while i < to {
        let c = chars[i];
        if matches!(c, '.' | '?' | '!') && is_boundary(chars, i, to) {
            push_sentence(doc, chars, start, i + 1, out);
            start = i + 1;
        }
        i += 1;
    }
    push_sentence(doc, chars, start, to, out);
}

/// True when the terminator at `i` ends a sentence: followed by whitespace,
/// the next non-whitespace char is uppercase or a digit, and the word ending
/// here is not a guarded abbreviation.
fn is_boundary(chars: &[char], i: usize, to: usize) -> bool {
    if i + 1 >= to || !chars[i + 1].is_whitespace() {
        return false;
    }
    let mut j = i + 1;
    while j < to && chars[j].is_whitespace() {
        j += 1;
    }
    if j == to {
        return false;
    }
    if !(chars[j].is_uppercase() || chars[j].is_ascii_digit()) {
        return false;
    }
    !is_abbreviation(chars, i)
}

/// Checks the word ending at terminator index `i` (inclusive) against the
/// abbreviation guard list.
fn is_abbreviation(chars: &[char], i: usize) -> bool {
    let mut w = i;
    while w > 0 && !chars[w - 1].is_whitespace() {
        w -= 1;
    }
    let word: String = chars[w..=i].iter().collect::<String>().to_lowercase();
    if ABBREVIATIONS.contains(&word.as_str()) {
        return true;
    }
    if word == "al." {
        // "et al." spans two words; look one word back.
        let mut p = w;
        while p > 0 && chars[p - 1].is_whitespace() {
            p -= 1;
        }
        let mut q = p;
        while q > 0 && !chars[q - 1].is_whitespace() {
            q -= 1;
        }
        let prev: String = chars[q..p].iter().collect::<String>().to_lowercase();
        return prev == "et";
    }
    false
}

/// Appends `chars[start..end)` trimmed of surrounding whitespace, skipping
/// all-whitespace stretches.
fn push_sentence(doc: &Document, chars: &[char], start: usize, end: usize, out: &mut Vec<Sentence>) {
    let mut s = start;
    let mut e = end;
    while s < e && chars[s].is_whitespace() {
        s += 1;
    }
    while e > s && chars[e - 1].is_whitespace() {
        e -= 1;
    }
    if s == e {
        return;
    }
    out.push(Sentence {
        doc_id: doc.doc_id.clone(),
        index: out.len(),
        span: Span::new(s, e),
        text: chars[s..e].iter().collect(),
    });
}

/// Builds an entity-to-sentence assignment. An entity belongs to the unique
/// sentence containing its whole span; entities crossing sentence boundaries
/// map to `None`.
pub fn assign_to_sentences(entities: &[Entity], sentences: &[Sentence]) -> Vec<Option<usize>> {
    entities
        .iter()
        .map(|e| sentences.iter().position(|s| e.span.within(&s.span)))
        .collect()
}

/// Index entities by id for O(1) relation argument lookup.
pub fn entity_index(doc: &Document) -> HashMap<&str, &Entity> {
    doc.entities.iter().map(|e| (e.id.as_str(), e)).collect()
}
