use super::inventory::UnitId;
use super::lexicon::Lexicon;
use crate::error::{Error, Result};

pub type NodeId = u32;

pub const ROOT: NodeId = 0;

/// A word completing at a tree node, with its pronunciation log-probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WordEnd {
    pub word: u32,
    pub log_prob: f64,
}

#[derive(Clone, Debug)]
struct Node {
    unit: Option<UnitId>,
    parent: NodeId,
    depth: u32,
    children: Vec<(UnitId, NodeId)>,
    word_ends: Vec<WordEnd>,
}

/// Trie over lexicon pronunciations. Children are kept sorted by unit id.
#[derive(Clone, Debug)]
pub struct PrefixTree {
    nodes: Vec<Node>,
}

impl PrefixTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn unit(&self, node: NodeId) -> Option<UnitId> {
        self.nodes[node as usize].unit
    }

    pub fn parent(&self, node: NodeId) -> NodeId {
        self.nodes[node as usize].parent
    }

    pub fn depth(&self, node: NodeId) -> u32 {
        self.nodes[node as usize].depth
    }

    pub fn children(&self, node: NodeId) -> &[(UnitId, NodeId)] {
        &self.nodes[node as usize].children
    }

    pub fn child(&self, node: NodeId, unit: UnitId) -> Option<NodeId> {
        let ch = &self.nodes[node as usize].children;
        ch.binary_search_by_key(&unit, |&(u, _)| u)
            .ok()
            .map(|i| ch[i].1)
    }

    pub fn word_ends(&self, node: NodeId) -> &[WordEnd] {
        &self.nodes[node as usize].word_ends
    }

    pub fn is_word_end(&self, node: NodeId) -> bool {
        !self.nodes[node as usize].word_ends.is_empty()
    }

    /// Unit sequence spelled by the path from the root to `node`.
    pub fn spelling(&self, mut node: NodeId) -> Vec<UnitId> {
        let mut out = Vec::new();
        while let Some(u) = self.unit(node) {
            out.push(u);
            node = self.parent(node);
        }
        out.reverse();
        out
    }

    /// Every (pronunciation, word) pair reachable from the root, sorted.
    pub fn paths(&self) -> Vec<(Vec<UnitId>, u32)> {
        let mut out = Vec::new();
        for (id, n) in self.nodes.iter().enumerate() {
            if n.word_ends.is_empty() {
                continue;
            }
            let spelling = self.spelling(id as NodeId);
            for we in &n.word_ends {
                out.push((spelling.clone(), we.word));
            }
        }
        out.sort();
        out
    }
}

/// Collapses shared pronunciation prefixes into a trie.
pub fn build_prefix_tree(lexicon: &Lexicon) -> Result<PrefixTree> {
    if lexicon.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    let mut nodes = vec![Node {
        unit: None,
        parent: ROOT,
        depth: 0,
        children: Vec::new(),
        word_ends: Vec::new(),
    }];
    for (w, entry) in lexicon.entries().iter().enumerate() {
        let log_prob = lexicon.pron_log_prob(w as u32);
        for pron in &entry.prons {
            let mut cur = ROOT;
            for &u in pron {
                let ch = &nodes[cur as usize].children;
                cur = match ch.binary_search_by_key(&u, |&(x, _)| x) {
                    Ok(i) => ch[i].1,
                    Err(i) => {
                        let id = nodes.len() as NodeId;
                        let depth = nodes[cur as usize].depth + 1;
                        nodes[cur as usize].children.insert(i, (u, id));
                        nodes.push(Node {
                            unit: Some(u),
                            parent: cur,
                            depth,
                            children: Vec::new(),
                            word_ends: Vec::new(),
                        });
                        id
                    }
                };
            }
            nodes[cur as usize].word_ends.push(WordEnd {
                word: w as u32,
                log_prob,
            });
        }
    }
    if nodes
        .iter()
        .any(|n| !n.word_ends.is_empty() && !n.children.is_empty())
    {
        return Err(Error::InvalidArgument(
            "a word-final unit has continuations in the prefix tree".into(),
        ));
    }
    Ok(PrefixTree { nodes })
}
