//! Build a sememe graph and print the augmented subgraph of one word pair.

use std::collections::BTreeSet;

use sememelm::lexicon::{parse_relation_triples, SememeInventory};
use sememelm::relgraph::build_graph;

const TRIPLES: &str =
    "insect\tagent\tproduce\nproduce\tpatient\thoney\nhoney\tattribute\tsweet\nfire\tcause\tdamage\n";

fn main() -> sememelm::Result<()> {
    let mut inventory = SememeInventory::new();
    let triples = parse_relation_triples(TRIPLES.as_bytes(), &mut inventory)?;
    let graph = build_graph(&inventory, &triples)?;
    println!("{} nodes, {} edges", graph.node_count(), graph.edge_count());

    let ids =
        |labels: &[&str]| -> BTreeSet<_> { labels.iter().filter_map(|l| inventory.sememe_id(l)).collect() };
    let sub = graph
        .extract_subgraph(&ids(&["insect", "produce"]), &ids(&["honey", "sweet"]), 0)?
        .add_virtual_node()?;
    println!("{}", serde_json::to_string_pretty(&sub.to_json(&inventory))?);
    Ok(())
}
