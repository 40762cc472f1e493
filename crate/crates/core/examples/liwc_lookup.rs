//! Parses the bundled toy dictionary and looks up a few tokens, showing how
//! `*` stems match prefixes and how a category selection filters results.
//!
//! ```text
//! cargo run --example liwc_lookup
//! ```

use trignet::fixtures::toy_dictionary;

fn main() -> trignet::Result<()> {
    let dict = toy_dictionary();
    println!("{} categories, {} entries", dict.num_categories(), dict.num_entries());
    let sel = dict.select(["affect", "social"])?;
    for token in ["love", "happiness", "friends", "for", "weather"] {
        let names = |ids: std::collections::BTreeSet<_>| -> Vec<String> {
            ids.into_iter()
                .filter_map(|id| dict.category(id).map(|c| c.name.clone()))
                .collect()
        };
        println!(
            "{token:<10} all {:?}  selected {:?}",
            names(dict.lookup(token)),
            names(dict.categories_of(token, &sel))
        );
    }
    Ok(())
}
