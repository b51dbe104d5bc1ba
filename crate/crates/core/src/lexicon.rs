//! Sememe lexicons, sememe-relation triples and pretrained embedding tables.
//!
//! Three line-oriented UTF-8 formats are read here:
//!
//! * lexicon JSONL, one `{"word": str, "senses": [[str, ...], ...]}` per line;
//! * relation triples, `head<TAB>relation<TAB>tail`, no header;
//! * embedding text, `label v1 ... vD` separated by single spaces (GloVe layout).
//!
//! Sememe and relation-type labels are interned to dense ids in first-seen
//! order, so two parses of the same bytes always produce the same ids.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SememeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationTypeId(pub usize);

impl fmt::Display for SememeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Dense string interner; ids are positions in `labels`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Interner {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn intern(&mut self, label: &str) -> usize {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }
}

/// Sememe vocabulary plus relation-type vocabulary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SememeInventory {
    sememes: Interner,
    relations: Interner,
}

impl SememeInventory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern_sememe(&mut self, label: &str) -> SememeId {
        SememeId(self.sememes.intern(label))
    }

    pub fn intern_relation(&mut self, label: &str) -> RelationTypeId {
        RelationTypeId(self.relations.intern(label))
    }

    pub fn sememe_id(&self, label: &str) -> Option<SememeId> {
        self.sememes.get(label).map(SememeId)
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationTypeId> {
        self.relations.get(label).map(RelationTypeId)
    }

    pub fn sememe_label(&self, id: SememeId) -> Option<&str> {
        self.sememes.labels.get(id.0).map(String::as_str)
    }

    pub fn relation_label(&self, id: RelationTypeId) -> Option<&str> {
        self.relations.labels.get(id.0).map(String::as_str)
    }

    pub fn sememe_labels(&self) -> &[String] {
        &self.sememes.labels
    }

    pub fn relation_labels(&self) -> &[String] {
        &self.relations.labels
    }

    pub fn sememe_count(&self) -> usize {
        self.sememes.labels.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sememe_count() == 0 && self.relation_count() == 0
    }
}

/// How per-sense sememe sets are combined into a word's sememe set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SememeMode {
    /// Intersection over all senses. An empty result sends the word down the
    /// encoder-only path.
    #[default]
    Intersection,
    /// Union over all senses; only for experiments on polysemous lexicons.
    Union,
}

impl std::str::FromStr for SememeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intersection" => Ok(SememeMode::Intersection),
            "union" => Ok(SememeMode::Union),
            other => Err(Error::Config(format!("unknown sememe mode {other:?}"))),
        }
    }
}

impl fmt::Display for SememeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SememeMode::Intersection => "intersection",
            SememeMode::Union => "union",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordEntry {
    pub word: String,
    /// One non-empty set per sense, in input order.
    pub senses: Vec<BTreeSet<SememeId>>,
}

impl WordEntry {
    /// Sememes shared by every sense. May be empty.
    pub fn sememe_set(&self) -> BTreeSet<SememeId> {
        self.sememe_set_with(SememeMode::Intersection)
    }

    pub fn sememe_set_with(&self, mode: SememeMode) -> BTreeSet<SememeId> {
        let mut senses = self.senses.iter();
        let Some(first) = senses.next() else {
            return BTreeSet::new();
        };
        let mut acc = first.clone();
        for sense in senses {
            match mode {
                SememeMode::Intersection => acc.retain(|s| sense.contains(s)),
                SememeMode::Union => acc.extend(sense.iter().copied()),
            }
        }
        acc
    }
}

/// Free-function form of [`WordEntry::sememe_set`].
pub fn sememe_set(entry: &WordEntry) -> BTreeSet<SememeId> {
    entry.sememe_set()
}

/// Words in input order with a by-word index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<WordEntry>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: WordEntry) -> Result<()> {
        if self.index.contains_key(&entry.word) {
            return Err(Error::Invalid(format!("duplicate word {:?}", entry.word)));
        }
        self.index.insert(entry.word.clone(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    /// Exact lookup, falling back to the lowercased word.
    pub fn get(&self, word: &str) -> Option<&WordEntry> {
        self.index
            .get(word)
            .or_else(|| self.index.get(&word.to_lowercase()))
            .map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[WordEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    pub head: SememeId,
    pub relation: RelationTypeId,
    pub tail: SememeId,
}

#[derive(Deserialize, Serialize)]
struct LexiconRecord {
    word: String,
    senses: Vec<Vec<String>>,
}

/// Parses a lexicon JSONL stream into a fresh inventory.
pub fn parse_lexicon<R: BufRead>(reader: R) -> Result<(SememeInventory, Lexicon)> {
    let mut inventory = SememeInventory::new();
    let lexicon = parse_lexicon_into(reader, &mut inventory)?;
    Ok((inventory, lexicon))
}

/// Parses a lexicon JSONL stream, interning sememes into `inventory`.
pub fn parse_lexicon_into<R: BufRead>(reader: R, inventory: &mut SememeInventory) -> Result<Lexicon> {
    let mut lexicon = Lexicon::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: LexiconRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse("lexicon", lineno, e.to_string()))?;
        if record.senses.is_empty() {
            return Err(Error::parse(
                "lexicon",
                lineno,
                format!("word {:?} has no senses", record.word),
            ));
        }
        let mut senses = Vec::with_capacity(record.senses.len());
        for sense in &record.senses {
            if sense.is_empty() {
                return Err(Error::parse(
                    "lexicon",
                    lineno,
                    format!("word {:?} has an empty sense", record.word),
                ));
            }
            senses.push(sense.iter().map(|s| inventory.intern_sememe(s)).collect());
        }
        lexicon
            .insert(WordEntry {
                word: record.word,
                senses,
            })
            .map_err(|e| Error::parse("lexicon", lineno, e.to_string()))?;
    }
    Ok(lexicon)
}

pub fn write_lexicon<W: Write>(inventory: &SememeInventory, lexicon: &Lexicon, mut out: W) -> Result<()> {
    for entry in lexicon.entries() {
        let record = LexiconRecord {
            word: entry.word.clone(),
            senses: entry
                .senses
                .iter()
                .map(|sense| sense.iter().map(|&s| label_of(inventory, s)).collect())
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn label_of(inventory: &SememeInventory, id: SememeId) -> String {
    inventory.sememe_label(id).unwrap_or_default().to_owned()
}

/// Parses tab-separated triples. Sememes and relation types not yet in
/// `inventory` are added to it.
pub fn parse_relation_triples<R: BufRead>(
    reader: R,
    inventory: &mut SememeInventory,
) -> Result<Vec<RelationTriple>> {
    let mut triples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                "triples",
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        if let Some(pos) = fields.iter().position(|f| f.trim().is_empty()) {
            return Err(Error::parse(
                "triples",
                lineno,
                format!("field {} is empty", pos + 1),
            ));
        }
        triples.push(RelationTriple {
            head: inventory.intern_sememe(fields[0]),
            relation: inventory.intern_relation(fields[1]),
            tail: inventory.intern_sememe(fields[2]),
        });
    }
    Ok(triples)
}

pub fn write_relation_triples<W: Write>(
    inventory: &SememeInventory,
    triples: &[RelationTriple],
    mut out: W,
) -> Result<()> {
    for t in triples {
        writeln!(
            out,
            "{}\t{}\t{}",
            label_of(inventory, t.head),
            inventory.relation_label(t.relation).unwrap_or_default(),
            label_of(inventory, t.tail)
        )?;
    }
    Ok(())
}

/// Pretrained vectors keyed by label.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    labels: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            labels: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        })
    }

    pub fn insert(&mut self, label: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Invalid(format!(
                "vector for {label:?} has {} entries, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite entry for {label:?}")));
        }
        if self.index.contains_key(label) {
            return Err(Error::Invalid(format!("duplicate label {label:?}")));
        }
        self.index.insert(label.to_owned(), self.labels.len());
        self.labels.push(label.to_owned());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.index
            .get(label)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Exact lookup, then lowercase.
    pub fn get_folded(&self, label: &str) -> Option<&[f64]> {
        self.get(label).or_else(|| self.get(&label.to_lowercase()))
    }

    /// Vector for `label`, or a seeded draw from U(-0.05, 0.05) when the label
    /// is absent. The draw depends only on `(seed, label)`.
    pub fn lookup_or_impute(&self, label: &str, seed: u64) -> (Vec<f64>, bool) {
        if let Some(v) = self.get(label) {
            return (v.to_vec(), false);
        }
        log::info!("embedding for sememe {label:?} missing; imputing from U(-0.05, 0.05)");
        (impute_vector(label, self.dim, seed), true)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, label) in self.labels.iter().enumerate() {
            out.write_all(label.as_bytes())?;
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(out, " {v}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Seeded U(-0.05, 0.05) vector for a label missing from the embedding table.
pub fn impute_vector(label: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(label.as_bytes()));
    (0..dim).map(|_| rng.random_range(-0.05..0.05)).collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Reads `label v1 ... vD` lines. Every line must carry the same `D`.
pub fn load_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    let mut row = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else {
            continue;
        };
        row.clear();
        for tok in tokens {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse("embeddings", lineno, format!("non-numeric token {tok:?}")))?;
            row.push(v);
        }
        let table = match &mut table {
            Some(t) => t,
            None => table.insert(
                EmbeddingTable::new(row.len())
                    .map_err(|e| Error::parse("embeddings", lineno, e.to_string()))?,
            ),
        };
        if row.len() != table.dim {
            return Err(Error::parse(
                "embeddings",
                lineno,
                format!(
                    "dimension {} differs from earlier dimension {}",
                    row.len(),
                    table.dim
                ),
            ));
        }
        table
            .insert(label, &row)
            .map_err(|e| Error::parse("embeddings", lineno, e.to_string()))?;
    }
    match table {
        Some(t) => Ok(t),
        None => Err(Error::Invalid("embedding file contains no vectors".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(inv: &SememeInventory, labels: &[&str]) -> BTreeSet<SememeId> {
        labels.iter().map(|l| inv.sememe_id(l).unwrap()).collect()
    }

    #[test]
    fn empty_lexicon() {
        let (inv, lex) = parse_lexicon("".as_bytes()).unwrap();
        assert!(inv.is_empty());
        assert!(lex.is_empty());
    }

    #[test]
    fn firewall_has_two_senses_five_sememes() {
        let src =
            r#"{"word":"firewall","senses":[["software","obstruct","computer"],["facilities","fire"]]}"#;
        let (inv, lex) = parse_lexicon(src.as_bytes()).unwrap();
        assert_eq!(lex.len(), 1);
        let entry = lex.get("firewall").unwrap();
        assert_eq!(entry.senses.len(), 2);
        assert_eq!(inv.sememe_count(), 5);
        assert_eq!(inv.sememe_labels()[0], "software");
        // no sememe shared by both senses
        assert!(entry.sememe_set().is_empty());
        assert_eq!(entry.sememe_set_with(SememeMode::Union).len(), 5);
    }

    #[test]
    fn shared_sememe_interned_once() {
        let src = "{\"word\":\"blaze\",\"senses\":[[\"fire\"]]}\n{\"word\":\"ember\",\"senses\":[[\"fire\",\"small\"]]}\n";
        let (inv, lex) = parse_lexicon(src.as_bytes()).unwrap();
        assert_eq!(inv.sememe_count(), 2);
        let fire = inv.sememe_id("fire").unwrap();
        assert!(lex.get("blaze").unwrap().senses[0].contains(&fire));
        assert!(lex.get("ember").unwrap().senses[0].contains(&fire));
    }

    #[test]
    fn lexicon_errors() {
        let bad_json = "{\"word\":\"a\",\"senses\":[[\"x\"]]}\n{oops\n";
        match parse_lexicon(bad_json.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let dup = "{\"word\":\"a\",\"senses\":[[\"x\"]]}\n{\"word\":\"a\",\"senses\":[[\"y\"]]}\n";
        assert!(matches!(
            parse_lexicon(dup.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let no_senses = "{\"word\":\"a\",\"senses\":[]}";
        assert!(parse_lexicon(no_senses.as_bytes()).is_err());
        let empty_sense = "{\"word\":\"a\",\"senses\":[[]]}";
        assert!(parse_lexicon(empty_sense.as_bytes()).is_err());
    }

    #[test]
    fn sense_intersection() {
        let src = "{\"word\":\"w1\",\"senses\":[[\"A\",\"B\"],[\"B\",\"C\"]]}\n\
                   {\"word\":\"w2\",\"senses\":[[\"A\",\"B\"]]}\n\
                   {\"word\":\"w3\",\"senses\":[[\"A\"],[\"B\"]]}\n";
        let (inv, lex) = parse_lexicon(src.as_bytes()).unwrap();
        assert_eq!(sememe_set(lex.get("w1").unwrap()), ids(&inv, &["B"]));
        assert_eq!(sememe_set(lex.get("w2").unwrap()), ids(&inv, &["A", "B"]));
        assert!(sememe_set(lex.get("w3").unwrap()).is_empty());
    }

    #[test]
    fn triples_parse_and_extend_inventory() {
        let mut inv = SememeInventory::new();
        assert!(parse_relation_triples("".as_bytes(), &mut inv)
            .unwrap()
            .is_empty());

        let triples =
            parse_relation_triples("obstruct\tInstrumentOf\tcomputer\n".as_bytes(), &mut inv).unwrap();
        assert_eq!(triples.len(), 1);
        assert_eq!(inv.sememe_count(), 2);
        assert_eq!(inv.relation_count(), 1);
        let mut out = Vec::new();
        write_relation_triples(&inv, &triples, &mut out).unwrap();
        assert_eq!(out, b"obstruct\tInstrumentOf\tcomputer\n");
    }

    #[test]
    fn triple_field_errors_name_the_line() {
        let mut inv = SememeInventory::new();
        let err = parse_relation_triples("a\tr\tb\na\tr\n".as_bytes(), &mut inv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_relation_triples("a\t\tb\n".as_bytes(), &mut inv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn embeddings_parse() {
        let t = load_embeddings("fire 0.5 -0.25\n".as_bytes()).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get("fire").unwrap(), &[0.5, -0.25]);
        assert!(t.get("water").is_none());

        let err = load_embeddings("a 1 2\nb 1 2 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(load_embeddings("a 1 x\n".as_bytes()).is_err());
        assert!(load_embeddings("a 1 2\na 3 4\n".as_bytes()).is_err());
        assert!(load_embeddings("a 1 NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn embeddings_300_columns() {
        let line: String = std::iter::once("sememe".to_string())
            .chain((0..300).map(|i| format!("{}", i as f64 * 0.001)))
            .collect::<Vec<_>>()
            .join(" ");
        let t = load_embeddings(line.as_bytes()).unwrap();
        assert_eq!(t.dim(), 300);
    }

    #[test]
    fn imputation_is_seeded_and_bounded() {
        let t = load_embeddings("fire 0.5 -0.25 1.0\n".as_bytes()).unwrap();
        let (a, imputed) = t.lookup_or_impute("water", 3);
        assert!(imputed);
        assert_eq!(a, t.lookup_or_impute("water", 3).0);
        assert_ne!(a, t.lookup_or_impute("water", 4).0);
        assert!(a.iter().all(|v| (-0.05..0.05).contains(v)));
        assert_eq!(t.lookup_or_impute("fire", 3), (vec![0.5, -0.25, 1.0], false));
    }
}
