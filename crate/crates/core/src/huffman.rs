//! Huffman tree over word frequencies, addressed the way hierarchical softmax
//! needs it: for each word, the branch bits from the root down to its leaf and
//! the index of the internal node that makes each decision.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Bit taken towards the more frequent child of an internal node.
pub const BIT_POSITIVE: u8 = 0;
/// Bit taken towards the less frequent child of an internal node.
pub const BIT_NEGATIVE: u8 = 1;

/// A full binary tree with `V` leaves and `V - 1` internal nodes.
///
/// Internal nodes are numbered in merge order, so the root is always the last
/// one (`V - 2`). Leaves are word ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTree {
    codes: Vec<Vec<u8>>,
    paths: Vec<Vec<usize>>,
    /// `children[i][bit]`: node reached from internal node `i` on `bit`.
    children: Vec<[Node; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Leaf(usize),
    Internal(usize),
}

impl HuffmanTree {
    /// Builds the tree from raw frequencies indexed by word id.
    ///
    /// Merges always take the two lightest nodes, ordering ties by creation
    /// index (leaves first, then merged nodes in merge order), which makes the
    /// result independent of the heap implementation.
    pub fn from_frequencies(freqs: &[usize]) -> Result<Self> {
        let v = freqs.len();
        if v == 0 {
            return Err(Error::EmptyVocabulary { min_count: 0 });
        }

        // (weight, creation index); creation index < v means leaf
        let mut heap: BinaryHeap<Reverse<(u128, usize)>> = freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| Reverse((f as u128, i)))
            .collect();
        let mut children = Vec::with_capacity(v - 1);
        let node = |created: usize| {
            if created < v {
                Node::Leaf(created)
            } else {
                Node::Internal(created - v)
            }
        };
        while heap.len() > 1 {
            let Reverse((w_light, light)) = heap.pop().unwrap();
            let Reverse((w_heavy, heavy)) = heap.pop().unwrap();
            let mut pair = [Node::Leaf(0); 2];
            pair[BIT_POSITIVE as usize] = node(heavy);
            pair[BIT_NEGATIVE as usize] = node(light);
            children.push(pair);
            heap.push(Reverse((w_light + w_heavy, v + children.len() - 1)));
        }

        let mut codes = vec![Vec::new(); v];
        let mut paths = vec![Vec::new(); v];
        if v > 1 {
            // depth-first walk from the root, carrying the prefix
            let mut stack = vec![(children.len() - 1, Vec::<u8>::new(), Vec::<usize>::new())];
            while let Some((inner, code, path)) = stack.pop() {
                for bit in [BIT_POSITIVE, BIT_NEGATIVE] {
                    let mut code = code.clone();
                    let mut path = path.clone();
                    code.push(bit);
                    path.push(inner);
                    match children[inner][bit as usize] {
                        Node::Leaf(w) => {
                            codes[w] = code;
                            paths[w] = path;
                        }
                        Node::Internal(i) => stack.push((i, code, path)),
                    }
                }
            }
        }

        Ok(HuffmanTree {
            codes,
            paths,
            children,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.codes.len()
    }

    pub fn internal_count(&self) -> usize {
        self.children.len()
    }

    /// Internal index of the root, `None` for a single-word tree.
    pub fn root(&self) -> Option<usize> {
        self.children.len().checked_sub(1)
    }

    pub fn child(&self, internal: usize, bit: u8) -> Node {
        self.children[internal][bit as usize]
    }

    /// Branch bits and internal-node indices from the root to `word`'s leaf.
    pub fn path_of(&self, word: usize) -> Result<(&[u8], &[usize])> {
        match (self.codes.get(word), self.paths.get(word)) {
            (Some(c), Some(p)) => Ok((c, p)),
            _ => Err(Error::WordOutOfRange {
                id: word,
                size: self.leaf_count(),
            }),
        }
    }

    /// Unchecked variant for hot loops; panics on an invalid id.
    #[inline]
    pub(crate) fn path(&self, word: usize) -> (&[u8], &[usize]) {
        (&self.codes[word], &self.paths[word])
    }

    pub fn code_len(&self, word: usize) -> usize {
        self.codes[word].len()
    }

    pub fn weighted_length(&self, freqs: &[usize]) -> u128 {
        freqs
            .iter()
            .zip(&self.codes)
            .map(|(&f, c)| f as u128 * c.len() as u128)
            .sum()
    }

    /// Diagnostic dump, one `<word> <bitstring>` line per word in id order.
    pub fn write_codes<W: Write>(&self, vocab: &Vocabulary, mut out: W) -> std::io::Result<()> {
        for (id, code) in self.codes.iter().enumerate() {
            let bits: String = code.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect();
            writeln!(out, "{} {}", vocab.surface(id).unwrap_or("?"), bits)?;
        }
        Ok(())
    }
}

pub fn build_huffman(vocab: &Vocabulary) -> Result<HuffmanTree> {
    let freqs: Vec<usize> = vocab.frequencies().collect();
    HuffmanTree::from_frequencies(&freqs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kraft_sum(tree: &HuffmanTree) -> f64 {
        (0..tree.leaf_count())
            .map(|w| 0.5f64.powi(tree.code_len(w) as i32))
            .sum()
    }

    fn walk(tree: &HuffmanTree, code: &[u8]) -> Option<usize> {
        let mut at = tree.root()?;
        for (i, &bit) in code.iter().enumerate() {
            match tree.child(at, bit) {
                Node::Leaf(w) => return (i + 1 == code.len()).then_some(w),
                Node::Internal(next) => at = next,
            }
        }
        None
    }

    #[test]
    fn four_word_example() {
        let freqs = [5, 2, 1, 1];
        let tree = HuffmanTree::from_frequencies(&freqs).unwrap();
        let lens: Vec<usize> = (0..4).map(|w| tree.code_len(w)).collect();
        assert_eq!(lens, [1, 2, 3, 3]);
        assert_eq!(tree.weighted_length(&freqs), 15);
        assert_eq!(tree.internal_count(), 3);
        let (code, path) = tree.path_of(0).unwrap();
        assert_eq!(code, [BIT_POSITIVE]);
        assert_eq!(path, [tree.root().unwrap()]);
    }

    #[test]
    fn two_words() {
        let tree = HuffmanTree::from_frequencies(&[1, 1]).unwrap();
        let (c0, p0) = tree.path_of(0).unwrap();
        let (c1, p1) = tree.path_of(1).unwrap();
        assert_eq!(p0, [0]);
        assert_eq!(p1, [0]);
        let mut bits = [c0[0], c1[0]];
        bits.sort();
        assert_eq!(bits, [0, 1]);
        // equal weights: the earlier-created node is taken as the lighter one
        assert_eq!(c0, [BIT_NEGATIVE]);
    }

    #[test]
    fn heavier_child_gets_positive_bit() {
        let tree = HuffmanTree::from_frequencies(&[1, 3]).unwrap();
        assert_eq!(tree.path_of(1).unwrap().0, [BIT_POSITIVE]);
        assert_eq!(tree.path_of(0).unwrap().0, [BIT_NEGATIVE]);
    }

    #[test]
    fn single_word_tree_is_degenerate() {
        let tree = HuffmanTree::from_frequencies(&[3]).unwrap();
        assert_eq!(tree.internal_count(), 0);
        assert_eq!(tree.root(), None);
        let (code, path) = tree.path_of(0).unwrap();
        assert!(code.is_empty() && path.is_empty());
    }

    #[test]
    fn errors() {
        assert!(HuffmanTree::from_frequencies(&[]).is_err());
        let tree = HuffmanTree::from_frequencies(&[1, 1]).unwrap();
        assert!(matches!(tree.path_of(2), Err(Error::WordOutOfRange { id: 2, size: 2 })));
    }

    #[test]
    fn code_dump() {
        let sentences = vec![vec!["a", "a", "b"]];
        let vocab = crate::corpus::build_vocabulary(&sentences, 1).unwrap();
        let tree = build_huffman(&vocab).unwrap();
        let mut out = Vec::new();
        tree.write_codes(&vocab, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a 0\nb 1\n");
    }

    proptest! {
        #[test]
        fn structural_invariants(freqs in prop::collection::vec(1usize..1000, 2..80)) {
            let tree = HuffmanTree::from_frequencies(&freqs).unwrap();
            let v = freqs.len();
            prop_assert_eq!(tree.internal_count(), v - 1);
            prop_assert!((kraft_sum(&tree) - 1.0).abs() < 1e-12);
            let root = tree.root().unwrap();
            for w in 0..v {
                let (code, path) = tree.path_of(w).unwrap();
                prop_assert!(!code.is_empty());
                prop_assert_eq!(code.len(), path.len());
                prop_assert_eq!(path[0], root);
                prop_assert!(path.iter().all(|&i| i < v - 1));
                prop_assert_eq!(walk(&tree, code), Some(w));
            }
            for a in 0..v {
                for b in 0..v {
                    let (ca, _) = tree.path_of(a).unwrap();
                    let (cb, _) = tree.path_of(b).unwrap();
                    prop_assert!(a == b || !cb.starts_with(ca));
                }
            }
            prop_assert_eq!(&HuffmanTree::from_frequencies(&freqs).unwrap(), &tree);
        }
    }
}
