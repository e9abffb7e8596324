//! Unit inventories, pronunciation lexica and the lexical prefix tree used by
//! closed-vocabulary search.

mod inventory;
#[allow(clippy::module_inception)]
mod lexicon;
mod tree;

pub use inventory::{normalize_inventory, strip_stress, Inventory, UnitId, SILENCE, WORD_END_MARK};
pub use lexicon::{Lexicon, LexiconEntry};
pub use tree::{build_prefix_tree, NodeId, PrefixTree, WordEnd, ROOT};
