//! Synthetic desk-scale fixture.
//!
//! Words fall into categories, each tagged with a category sememe. Every
//! training relation links two categories and is mirrored by a graph edge
//! of its own type between the two category sememes, so the answer to each
//! generated analogy question can be read off the graph alone.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::evalkit::AnalogyQuestion;
use crate::lexicon::{
    write_lexicon, write_relation_triples, EmbeddingTable, Lexicon, RelationTriple, SememeId,
    SememeInventory, WordEntry,
};
use crate::model::WordPair;
use crate::relgraph::build_graph;
use crate::training::{RelationRecord, ScoredPair, TrainConfig};

pub const LEXICON_FILE: &str = "lexicon.jsonl";
pub const TRIPLES_FILE: &str = "triples.tsv";
pub const EMBEDDINGS_FILE: &str = "sememes.vec";
pub const RELATIONS_FILE: &str = "relations.jsonl";
pub const ANALOGY_FILE: &str = "analogy.jsonl";
pub const CONFIG_FILE: &str = "train.conf";

/// Prefix of the graph relation types that encode a word relation.
pub const LINK_PREFIX: &str = "link_";

#[derive(Clone, Debug)]
pub struct SynthOptions {
    pub seed: u64,
    pub categories: usize,
    pub words_per_category: usize,
    pub traits_per_category: usize,
    pub relations: usize,
    pub positives: usize,
    pub negatives: usize,
    pub questions: usize,
    pub choices: usize,
    pub noise_edges: usize,
    pub noise_types: usize,
    pub graph_dim: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            categories: 8,
            words_per_category: 8,
            traits_per_category: 4,
            relations: 14,
            positives: 12,
            negatives: 12,
            questions: 200,
            choices: 4,
            noise_edges: 40,
            noise_types: 4,
            graph_dim: 16,
        }
    }
}

/// Generated files in write order, as `(file name, contents)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthFixture {
    pub files: Vec<(&'static str, String)>,
}

impl SynthFixture {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|source| Error::Io { path, source })?;
        }
        Ok(())
    }
}

fn pseudo_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    const ONSETS: &[&str] = &[
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
    ];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w: String = (0..3)
            .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
            .collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn round_to(v: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (v * f).round() / f
}

fn text_of(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Invalid(e.to_string()))
}

struct World {
    inventory: SememeInventory,
    lexicon: Lexicon,
    triples: Vec<RelationTriple>,
    /// `words[c][j]`
    words: Vec<Vec<String>>,
    /// Ordered category pair per relation.
    links: Vec<(usize, usize)>,
}

impl World {
    fn degenerate(&self, word_index: usize) -> bool {
        word_index + 1 == self.words[0].len()
    }

    fn link_label(r: usize) -> String {
        format!("{LINK_PREFIX}{r:02}")
    }
}

fn build_world(opts: &SynthOptions, rng: &mut ChaCha8Rng) -> Result<World> {
    let (nc, nw, nt) = (opts.categories, opts.words_per_category, opts.traits_per_category);
    if nc < opts.choices || nw < 3 || nt < 2 {
        return Err(Error::Config("synthetic world is too small".into()));
    }
    let max_links = nc * (nc - 1) / 2;
    if opts.relations > max_links || opts.relations < opts.choices {
        return Err(Error::Config(format!(
            "relations must lie in {}..={max_links} for {nc} categories",
            opts.choices
        )));
    }

    let mut inventory = SememeInventory::new();
    let classes: Vec<SememeId> = (0..nc)
        .map(|c| inventory.intern_sememe(&format!("class_{c}")))
        .collect();
    let traits: Vec<Vec<SememeId>> = (0..nc)
        .map(|c| {
            (0..nt)
                .map(|j| inventory.intern_sememe(&format!("trait_{c}_{j}")))
                .collect()
        })
        .collect();

    let flat = pseudo_words(rng, nc * nw);
    let words: Vec<Vec<String>> = flat.chunks(nw).map(|c| c.to_vec()).collect();
    let mut lexicon = Lexicon::new();
    for c in 0..nc {
        for (j, word) in words[c].iter().enumerate() {
            let picks: Vec<SememeId> = traits[c].choose_multiple(rng, 2).copied().collect();
            let senses = if j + 1 == nw {
                // senses share nothing: empty intersection
                let other = (c + 1 + rng.random_range(0..nc - 1)) % nc;
                vec![
                    BTreeSet::from([classes[c], picks[0]]),
                    BTreeSet::from([*traits[other].choose(rng).unwrap()]),
                ]
            } else {
                vec![
                    BTreeSet::from([classes[c], picks[0], picks[1]]),
                    BTreeSet::from([classes[c], picks[0]]),
                ]
            };
            lexicon.insert(WordEntry {
                word: word.clone(),
                senses,
            })?;
        }
    }

    let mut category_pairs: Vec<(usize, usize)> =
        (0..nc).flat_map(|a| (a + 1..nc).map(move |b| (a, b))).collect();
    category_pairs.shuffle(rng);
    let links: Vec<(usize, usize)> = category_pairs[..opts.relations]
        .iter()
        .map(|&(a, b)| if rng.random_bool(0.5) { (b, a) } else { (a, b) })
        .collect();

    let mut triples = Vec::new();
    for (r, &(a, b)) in links.iter().enumerate() {
        let rel = inventory.intern_relation(&World::link_label(r));
        triples.push(RelationTriple {
            head: classes[a],
            relation: rel,
            tail: classes[b],
        });
    }
    let part_of = inventory.intern_relation("part_of");
    for c in 0..nc {
        for &t in &traits[c] {
            triples.push(RelationTriple {
                head: t,
                relation: part_of,
                tail: classes[c],
            });
        }
    }
    let noise: Vec<_> = (0..opts.noise_types)
        .map(|k| inventory.intern_relation(&format!("assoc_{k}")))
        .collect();
    let all_traits: Vec<SememeId> = traits.iter().flatten().copied().collect();
    let mut seen = HashSet::new();
    while seen.len() < opts.noise_edges {
        let h = *all_traits.choose(rng).unwrap();
        let t = *all_traits.choose(rng).unwrap();
        if h == t || !seen.insert((h, t)) {
            continue;
        }
        triples.push(RelationTriple {
            head: h,
            relation: *noise.choose(rng).unwrap(),
            tail: t,
        });
    }
    Ok(World {
        inventory,
        lexicon,
        triples,
        words,
        links,
    })
}

fn relation_records(
    opts: &SynthOptions,
    world: &World,
    rng: &mut ChaCha8Rng,
) -> (Vec<RelationRecord>, HashSet<WordPair>) {
    let nw = opts.words_per_category;
    let mut used = HashSet::new();
    let mut records = Vec::with_capacity(world.links.len());
    for (r, &(a, b)) in world.links.iter().enumerate() {
        let mut in_record = HashSet::new();
        let mut pairs = Vec::new();
        // a permutation first so every word of both categories is covered
        let mut sigma: Vec<usize> = (0..nw).collect();
        sigma.shuffle(rng);
        let mut candidates: Vec<(usize, usize)> = (0..nw).map(|i| (i, sigma[i])).collect();
        while candidates.len() < opts.positives {
            let c = (rng.random_range(0..nw), rng.random_range(0..nw));
            if !candidates.contains(&c) {
                candidates.push(c);
            }
        }
        for &(i, j) in candidates.iter().take(opts.positives.max(nw)) {
            let pair = WordPair::new(world.words[a][i].clone(), world.words[b][j].clone());
            in_record.insert(pair.clone());
            pairs.push(ScoredPair {
                head: pair.head,
                tail: pair.tail,
                score: round_to(rng.random_range(0.6..1.0), 3),
            });
        }
        while pairs.len() < opts.positives.max(nw) + opts.negatives {
            let other = (r + 1 + rng.random_range(0..world.links.len() - 1)) % world.links.len();
            let (oa, ob) = world.links[other];
            let pair = WordPair::new(
                world.words[oa][rng.random_range(0..nw)].clone(),
                world.words[ob][rng.random_range(0..nw)].clone(),
            );
            if !in_record.insert(pair.clone()) {
                continue;
            }
            pairs.push(ScoredPair {
                head: pair.head,
                tail: pair.tail,
                score: round_to(rng.random_range(0.0..0.3), 3),
            });
        }
        // interleave scores so ranking, not file order, decides membership
        pairs.shuffle(rng);
        used.extend(in_record);
        records.push(RelationRecord {
            relation: World::link_label(r),
            pairs,
        });
    }
    (records, used)
}

fn questions(
    opts: &SynthOptions,
    world: &World,
    used: &HashSet<WordPair>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AnalogyQuestion>> {
    let nw = opts.words_per_category;
    let pools: Vec<Vec<WordPair>> = world
        .links
        .iter()
        .map(|&(a, b)| {
            (0..nw)
                .flat_map(|i| (0..nw).map(move |j| (i, j)))
                .filter(|&(i, j)| !world.degenerate(i) && !world.degenerate(j))
                .map(|(i, j)| WordPair::new(world.words[a][i].clone(), world.words[b][j].clone()))
                .filter(|p| !used.contains(p))
                .collect()
        })
        .collect();
    if pools.iter().any(|p| p.len() < 2) {
        return Err(Error::Config(
            "not enough unused pairs for analogy questions".into(),
        ));
    }
    let relation_ids: Vec<usize> = (0..world.links.len()).collect();
    let mut out = Vec::with_capacity(opts.questions);
    for _ in 0..opts.questions {
        let r = *relation_ids.choose(rng).unwrap();
        let two: Vec<&WordPair> = pools[r].choose_multiple(rng, 2).collect();
        let others: Vec<usize> = relation_ids.iter().copied().filter(|&o| o != r).collect();
        let mut choices: Vec<WordPair> = others
            .choose_multiple(rng, opts.choices - 1)
            .map(|&o| pools[o].choose(rng).unwrap().clone())
            .collect();
        let answer = rng.random_range(0..opts.choices);
        choices.insert(answer, two[1].clone());
        out.push(AnalogyQuestion::new(two[0].clone(), choices, answer)?);
    }
    Ok(out)
}

/// Relation type linking the sememes of `pair` through a word-relation edge,
/// read from the graph only.
fn structural_link(world: &World, graph: &crate::relgraph::SememeGraph, pair: &WordPair) -> Option<String> {
    let head = world.lexicon.get(&pair.head)?.sememe_set();
    let tail = world.lexicon.get(&pair.tail)?.sememe_set();
    let labels: BTreeSet<&str> = graph
        .edges()
        .iter()
        .filter(|e| head.contains(&e.head) && tail.contains(&e.tail))
        .filter_map(|e| world.inventory.relation_label(e.relation))
        .filter(|l| l.starts_with(LINK_PREFIX))
        .collect();
    (labels.len() == 1).then(|| labels.into_iter().next().unwrap().to_string())
}

fn verify(world: &World, qs: &[AnalogyQuestion]) -> Result<()> {
    let graph = build_graph(&world.inventory, &world.triples)?;
    for (i, q) in qs.iter().enumerate() {
        let stem = structural_link(world, &graph, &q.stem)
            .ok_or_else(|| Error::Invalid(format!("question {i}: stem has no unique link")))?;
        let matching: Vec<usize> = q
            .choices
            .iter()
            .enumerate()
            .filter(|(_, c)| structural_link(world, &graph, c).as_deref() == Some(stem.as_str()))
            .map(|(k, _)| k)
            .collect();
        if matching != [q.answer] {
            return Err(Error::Invalid(format!(
                "question {i}: structurally correct choices {matching:?}, answer {}",
                q.answer
            )));
        }
    }
    Ok(())
}

/// Training configuration shipped with the fixture.
///
/// With the negatives-only denominator the contrastive objective has no lower
/// bound: it keeps decreasing by inflating vector norms and training becomes
/// unstable, so the fixture uses the bounded form and a sharper temperature.
pub fn fixture_config(opts: &SynthOptions) -> TrainConfig {
    TrainConfig {
        seed: opts.seed,
        tau: 0.1,
        denominator_includes_positive: true,
        graph_dim: opts.graph_dim,
        encoder_dim: 32,
        learning_rate: 0.01,
        batch_relations: 4,
        epochs: 150,
        ..TrainConfig::default()
    }
}

pub fn generate(opts: &SynthOptions) -> Result<SynthFixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let world = build_world(opts, &mut rng)?;
    let (records, used) = relation_records(opts, &world, &mut rng);
    let qs = questions(opts, &world, &used, &mut rng)?;
    verify(&world, &qs)?;

    let normal = Normal::new(0.0, 0.5).expect("valid normal");
    let mut table = EmbeddingTable::new(opts.graph_dim)?;
    for label in world.inventory.sememe_labels() {
        let v: Vec<f64> = (0..opts.graph_dim)
            .map(|_| round_to(normal.sample(&mut rng), 4))
            .collect();
        table.insert(label, &v)?;
    }

    let lexicon = text_of(|b| write_lexicon(&world.inventory, &world.lexicon, b))?;
    let triples = text_of(|b| write_relation_triples(&world.inventory, &world.triples, b))?;
    let embeddings = text_of(|b| table.write(b))?;
    let mut relations = String::new();
    for rec in &records {
        relations.push_str(&serde_json::to_string(rec)?);
        relations.push('\n');
    }
    let analogy: String = qs.iter().map(|q| q.to_json_line() + "\n").collect();
    let config = fixture_config(opts).to_text();
    Ok(SynthFixture {
        files: vec![
            (LEXICON_FILE, lexicon),
            (TRIPLES_FILE, triples),
            (EMBEDDINGS_FILE, embeddings),
            (RELATIONS_FILE, relations),
            (ANALOGY_FILE, analogy),
            (CONFIG_FILE, config),
        ],
    })
}
