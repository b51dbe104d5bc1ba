//! Parse a small lexicon and show which words keep a sememe set.

use sememelm::lexicon::{parse_lexicon, sememe_set};

const LEXICON: &str = r#"{"word":"firewall","senses":[["software","obstruct","computer"],["facilities","fire"]]}
{"word":"bee","senses":[["insect","produce","honey"]]}
{"word":"honey","senses":[["food","sweet"],["food","honey"]]}
"#;

fn main() -> sememelm::Result<()> {
    let (inventory, lexicon) = parse_lexicon(LEXICON.as_bytes())?;
    println!("{} sememes interned", inventory.sememe_count());
    for entry in lexicon.entries() {
        let set: Vec<&str> = sememe_set(entry)
            .into_iter()
            .filter_map(|id| inventory.sememe_label(id))
            .collect();
        if set.is_empty() {
            println!(
                "{:<10} {} senses, no shared sememe (encoder only)",
                entry.word,
                entry.senses.len()
            );
        } else {
            println!(
                "{:<10} {} senses, sememes {set:?}",
                entry.word,
                entry.senses.len()
            );
        }
    }
    Ok(())
}
