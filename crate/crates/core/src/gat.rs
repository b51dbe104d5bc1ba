//! Graph attention encoder for pair subgraphs.
//!
//! Node states are rows of an `n × d` matrix. Per layer and head, node `i`
//! attends over `N+(i)`: the sources of its incoming edges plus itself.
//! Logits are dot products of query and key transforms (no scaling), and the
//! new state is `LeakyReLU(Σ_j α_ij · W h_j)`. With more than one head the
//! head outputs are averaged before the activation.
//!
//! The virtual node is a sink, so after `L` layers its state summarises the
//! pair; that row is `h_g`. [`project`] maps it to the text-encoder width.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Matrix, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::lexicon::{EmbeddingTable, SememeInventory};
use crate::relgraph::PairSubgraph;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GatConfig {
    pub graph_dim: usize,
    pub encoder_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub leaky_slope: f64,
}

impl Default for GatConfig {
    fn default() -> Self {
        Self {
            graph_dim: 300,
            encoder_dim: 64,
            layers: 2,
            heads: 1,
            leaky_slope: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadParams {
    pub value: ParamId,
    pub query: ParamId,
    pub key: ParamId,
}

/// Handles into a [`ParamStore`] for every GAT parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct GatParams {
    pub config: GatConfig,
    /// `layers[l][h]`
    pub layers: Vec<Vec<HeadParams>>,
    pub virtual_seed: ParamId,
    /// `encoder_dim × graph_dim`
    pub projection: ParamId,
}

fn xavier(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

impl GatParams {
    pub fn init(store: &mut ParamStore, config: GatConfig, rng: &mut impl Rng) -> Result<Self> {
        if config.layers == 0 || config.heads == 0 || config.graph_dim == 0 {
            return Err(Error::Config(
                "graph layers, heads and dimension must be positive".into(),
            ));
        }
        let d = config.graph_dim;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let heads = (0..config.heads)
                .map(|h| HeadParams {
                    value: store.add(format!("gat.layer{l}.head{h}.value"), xavier(rng, d, d)),
                    query: store.add(format!("gat.layer{l}.head{h}.query"), xavier(rng, d, d)),
                    key: store.add(format!("gat.layer{l}.head{h}.key"), xavier(rng, d, d)),
                })
                .collect();
            layers.push(heads);
        }
        let normal = Normal::new(0.0, 0.02).expect("valid sigma");
        let seed = (0..d).map(|_| normal.sample(rng)).collect();
        let virtual_seed = store.add("gat.virtual_seed", Matrix::row_vector(seed));
        let projection = store.add("proj.relation", xavier(rng, config.encoder_dim, d));
        Ok(Self {
            config,
            layers,
            virtual_seed,
            projection,
        })
    }

    /// Rebinds handles by name, as after loading a checkpoint.
    pub fn bind(store: &ParamStore, config: GatConfig) -> Result<Self> {
        let find = |name: String| {
            store
                .find(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
        };
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let mut heads = Vec::with_capacity(config.heads);
            for h in 0..config.heads {
                heads.push(HeadParams {
                    value: find(format!("gat.layer{l}.head{h}.value"))?,
                    query: find(format!("gat.layer{l}.head{h}.query"))?,
                    key: find(format!("gat.layer{l}.head{h}.key"))?,
                });
            }
            layers.push(heads);
        }
        Ok(Self {
            config,
            layers,
            virtual_seed: find("gat.virtual_seed".into())?,
            projection: find("proj.relation".into())?,
        })
    }
}

/// Row-major `n × n` mask: entry `(i, j)` is true when `j ∈ N+(i)`.
pub fn attention_mask(subgraph: &PairSubgraph) -> Vec<bool> {
    let n = subgraph.node_count();
    let mut mask = vec![false; n * n];
    for (i, sources) in subgraph.incoming().iter().enumerate() {
        mask[i * n + i] = true;
        for &j in sources {
            mask[i * n + j] = true;
        }
    }
    mask
}

/// `H · Wᵀ` for a stored square matrix `W`.
fn transform(tape: &mut Tape, store: &ParamStore, h: Var, w: ParamId) -> Result<Var> {
    let w = tape.param(store, w)?;
    let wt = tape.transpose(w)?;
    tape.matmul(h, wt)
}

fn check_layer(params: &GatParams, layer: usize, head: usize) -> Result<HeadParams> {
    params
        .layers
        .get(layer)
        .and_then(|heads| heads.get(head))
        .copied()
        .ok_or_else(|| Error::Config(format!("no GAT layer {layer} head {head}")))
}

/// Attention weights of one layer and head; rows are receiving nodes.
pub fn attention_coefficients(
    tape: &mut Tape,
    store: &ParamStore,
    params: &GatParams,
    layer: usize,
    head: usize,
    states: Var,
    mask: &[bool],
) -> Result<Var> {
    let hp = check_layer(params, layer, head)?;
    let q = transform(tape, store, states, hp.query)?;
    let k = transform(tape, store, states, hp.key)?;
    let kt = tape.transpose(k)?;
    let logits = tape.matmul(q, kt)?;
    tape.masked_softmax_rows(logits, mask)
}

/// One message-passing step: `n × d` states in, `n × d` states out.
pub fn gat_layer(
    tape: &mut Tape,
    store: &ParamStore,
    params: &GatParams,
    layer: usize,
    states: Var,
    mask: &[bool],
) -> Result<Var> {
    let (n, d) = tape.value(states).shape();
    if d != params.config.graph_dim || mask.len() != n * n {
        return Err(Error::shape(
            "gat_layer",
            format!(
                "states {n}x{d}, mask {} for graph dim {}",
                mask.len(),
                params.config.graph_dim
            ),
        ));
    }
    let heads = params.config.heads;
    let mut outputs = Vec::with_capacity(heads);
    for h in 0..heads {
        let alpha = attention_coefficients(tape, store, params, layer, h, states, mask)?;
        let values = transform(tape, store, states, params.layers[layer][h].value)?;
        outputs.push(tape.matmul(alpha, values)?);
    }
    let mut agg = outputs[0];
    for &o in &outputs[1..] {
        agg = tape.add(agg, o)?;
    }
    if heads > 1 {
        agg = tape.scale(agg, 1.0 / heads as f64)?;
    }
    tape.leaky_relu(agg, params.config.leaky_slope)
}

#[derive(Clone, Copy, Debug)]
pub struct GraphEncoding {
    /// `1 × d` final state of the virtual node.
    pub relation: Var,
    /// `n_sememes × d` final states, row-aligned with `local_nodes`.
    pub sememes: Var,
    pub layers_applied: usize,
}

/// Runs all layers over an augmented subgraph. `initial` holds one row per
/// sememe node; the virtual node starts from the trainable seed.
pub fn encode_pair(
    tape: &mut Tape,
    store: &ParamStore,
    params: &GatParams,
    subgraph: &PairSubgraph,
    initial: &Matrix,
) -> Result<GraphEncoding> {
    let Some(virtual_index) = subgraph.virtual_index else {
        return Err(Error::Subgraph("subgraph has no virtual node".into()));
    };
    let sememes = subgraph.sememe_count();
    if initial.shape() != (sememes, params.config.graph_dim) {
        return Err(Error::shape(
            "encode_pair",
            format!(
                "initial states {:?}, expected ({sememes}, {})",
                initial.shape(),
                params.config.graph_dim
            ),
        ));
    }
    let mask = attention_mask(subgraph);
    let init = tape.constant(initial.clone())?;
    let seed = tape.param(store, params.virtual_seed)?;
    let mut states = tape.concat_rows(&[init, seed])?;
    let mut layers_applied = 0;
    for l in 0..params.config.layers {
        states = gat_layer(tape, store, params, l, states, &mask)?;
        layers_applied += 1;
    }
    let relation = tape.select_rows(states, &[virtual_index])?;
    let rows: Vec<usize> = (0..sememes).collect();
    let sememe_states = tape.select_rows(states, &rows)?;
    Ok(GraphEncoding {
        relation,
        sememes: sememe_states,
        layers_applied,
    })
}

/// `h_g' = W h_g`, returned as a `1 × encoder_dim` row.
pub fn project(tape: &mut Tape, store: &ParamStore, params: &GatParams, relation: Var) -> Result<Var> {
    let d = tape.value(relation).cols();
    if d != store.get(params.projection).cols() {
        return Err(Error::shape(
            "project",
            format!(
                "vector of {d} for projection {:?}",
                store.get(params.projection).shape()
            ),
        ));
    }
    transform(tape, store, relation, params.projection)
}

/// Initial sememe-node states from pretrained vectors; missing sememes are
/// imputed with [`EmbeddingTable::lookup_or_impute`].
pub fn initial_states(
    subgraph: &PairSubgraph,
    inventory: &SememeInventory,
    table: &EmbeddingTable,
    impute_seed: u64,
) -> Matrix {
    let rows: Vec<Vec<f64>> = subgraph
        .local_nodes
        .iter()
        .map(|&id| {
            let label = inventory.sememe_label(id).unwrap_or_default();
            table.lookup_or_impute(label, impute_seed).0
        })
        .collect();
    Matrix::from_rows(&rows).expect("uniform embedding width")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relgraph::{EdgeLabel, LocalEdge};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain_subgraph() -> PairSubgraph {
        // 0 -> 1, 2 isolated, then virtual
        PairSubgraph {
            local_nodes: vec![
                crate::lexicon::SememeId(0),
                crate::lexicon::SememeId(1),
                crate::lexicon::SememeId(2),
            ],
            local_edges: vec![LocalEdge {
                src: 0,
                label: EdgeLabel::Relation(crate::lexicon::RelationTypeId(0)),
                dst: 1,
            }],
            virtual_index: None,
            head_members: vec![0],
            tail_members: vec![1, 2],
        }
        .add_virtual_node()
        .unwrap()
    }

    fn params(d: usize) -> (ParamStore, GatParams) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = GatConfig {
            graph_dim: d,
            encoder_dim: d,
            layers: 2,
            heads: 1,
            leaky_slope: 0.2,
        };
        let p = GatParams::init(&mut store, cfg, &mut rng).unwrap();
        (store, p)
    }

    #[test]
    fn mask_is_in_neighbours_plus_self() {
        let sg = chain_subgraph();
        let m = attention_mask(&sg);
        let at = |i: usize, j: usize| m[i * 4 + j];
        assert!(at(1, 0) && at(1, 1));
        assert!(!at(0, 1));
        // virtual node hears from everyone, nobody hears from it
        assert!((0..4).all(|j| at(3, j)));
        assert!((0..3).all(|i| !at(i, 3)));
    }

    #[test]
    fn isolated_node_attends_to_itself() {
        let sg = chain_subgraph();
        let (store, p) = params(3);
        let mut t = Tape::new();
        let h = t
            .constant(Matrix::from_vec(4, 3, (0..12).map(|v| v as f64 * 0.1).collect()).unwrap())
            .unwrap();
        let a = attention_coefficients(&mut t, &store, &p, 0, 0, h, &attention_mask(&sg)).unwrap();
        let a = t.value(a);
        assert_eq!(a[(2, 2)], 1.0);
        assert_eq!(a[(0, 0)], 1.0);
    }

    #[test]
    fn zero_value_transform_gives_zero_states() {
        let sg = chain_subgraph();
        let (mut store, p) = params(3);
        *store.get_mut(p.layers[0][0].value) = Matrix::zeros(3, 3);
        let mut t = Tape::new();
        let h = t.constant(Matrix::filled(4, 3, 0.7)).unwrap();
        let out = gat_layer(&mut t, &store, &p, 0, h, &attention_mask(&sg)).unwrap();
        assert!(t.value(out).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_node_identity_layer() {
        let sg = PairSubgraph {
            local_nodes: vec![crate::lexicon::SememeId(0)],
            local_edges: vec![],
            virtual_index: None,
            head_members: vec![0],
            tail_members: vec![0],
        };
        let (mut store, p) = params(2);
        *store.get_mut(p.layers[0][0].value) = Matrix::identity(2);
        *store.get_mut(p.layers[0][0].query) = Matrix::zeros(2, 2);
        *store.get_mut(p.layers[0][0].key) = Matrix::zeros(2, 2);
        let mut t = Tape::new();
        let h = t.constant(Matrix::row_vector(vec![0.25, 1.5])).unwrap();
        let out = gat_layer(&mut t, &store, &p, 0, h, &attention_mask(&sg)).unwrap();
        assert_eq!(t.value(out).as_slice(), &[0.25, 1.5]);
    }

    #[test]
    fn encode_runs_every_layer_and_needs_virtual_node() {
        let sg = chain_subgraph();
        let (store, p) = params(3);
        let init = Matrix::filled(3, 3, 0.1);
        let mut t = Tape::new();
        let enc = encode_pair(&mut t, &store, &p, &sg, &init).unwrap();
        assert_eq!(enc.layers_applied, 2);
        assert_eq!(t.value(enc.relation).shape(), (1, 3));
        assert_eq!(t.value(enc.sememes).shape(), (3, 3));

        let mut bare = sg.clone();
        bare.virtual_index = None;
        assert!(encode_pair(&mut t, &store, &p, &bare, &init).is_err());
    }

    #[test]
    fn projection_identity_and_zero() {
        let (mut store, p) = params(3);
        let mut t = Tape::new();
        let v = t.constant(Matrix::row_vector(vec![1.0, -2.0, 0.5])).unwrap();
        *store.get_mut(p.projection) = Matrix::identity(3);
        let out = project(&mut t, &store, &p, v).unwrap();
        assert_eq!(t.value(out).as_slice(), &[1.0, -2.0, 0.5]);

        let mut t = Tape::new();
        let v = t.constant(Matrix::row_vector(vec![1.0, -2.0, 0.5])).unwrap();
        *store.get_mut(p.projection) = Matrix::zeros(3, 3);
        let out = project(&mut t, &store, &p, v).unwrap();
        assert_eq!(t.value(out).as_slice(), &[0.0; 3]);

        let mut t = Tape::new();
        let short = t.constant(Matrix::row_vector(vec![1.0])).unwrap();
        assert!(project(&mut t, &store, &p, short).is_err());
    }

    #[test]
    fn rebinding_by_name_finds_the_same_handles() {
        let (store, p) = params(3);
        assert_eq!(GatParams::bind(&store, p.config).unwrap(), p);
    }
}
