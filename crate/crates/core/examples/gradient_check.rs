//! Compare tape gradients of the full training loss against central
//! differences on a few random graphs.

use sememelm::cli::gradcheck;

fn main() -> sememelm::Result<()> {
    for (seed, nodes) in [(7, 5), (1, 6), (3, 1)] {
        let r = gradcheck::run(seed, nodes, 8, 1e-5)?;
        println!(
            "seed {seed} nodes {nodes}: {} coordinates, max relative error {:.2e}",
            r.coordinates, r.max_rel_error
        );
    }
    Ok(())
}
