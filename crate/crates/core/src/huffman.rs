//! Label Huffman tree for hierarchical softmax.
//!
//! Leaves are class labels weighted by frequency; every internal node
//! carries a trainable parameter vector and represents one binary decision.
//! A label's probability is the product of sigmoid decisions along its
//! root-to-leaf path, so the K-way softmax costs O(log K) per prediction.
//!
//! Construction is the classic two-least-frequent merge with a fixed
//! tie-break (leaves by label id, then internal nodes by creation order),
//! which makes the tree deterministic. The left child carries code bit 1
//! ("positive"), the right child bit 0; this convention is serialized with
//! the model so files are portable.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::corpus::LabelId;
use crate::error::{Error, Result};

/// One step of a root-to-leaf path: internal-node index plus the code bit
/// taken there (1 = left/"positive", 0 = right).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub node: usize,
    pub bit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum NodeKind {
    Leaf(LabelId),
    Internal { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Node {
    pub(crate) kind: NodeKind,
}

/// The label tree with per-internal-node parameter vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HuffmanTree {
    /// All nodes; `root` indexes into this.
    pub(crate) nodes: Vec<Node>,
    pub(crate) root: usize,
    /// Root-to-leaf path per label id.
    pub(crate) paths: Vec<Vec<PathStep>>,
    /// Parameter vectors, one per internal node, flattened row-major.
    /// Internal node `i` of `n_internal` owns `thetas[i*dim..(i+1)*dim]`.
    pub(crate) thetas: Vec<f32>,
    /// Maps node index -> dense internal index (usize::MAX for leaves).
    pub(crate) internal_index: Vec<usize>,
    pub(crate) dim: usize,
}

impl HuffmanTree {
    /// Builds the tree from per-label frequencies (indexed by label id).
    /// Parameter vectors are zero-initialized at dimension `dim`.
    pub fn build(label_freqs: &[u64], dim: usize) -> Result<Self> {
        let k = label_freqs.len();
        if k < 2 {
            return Err(Error::Data(format!(
                "need >= 2 labels to build a label tree, got {k}"
            )));
        }
        if label_freqs.iter().any(|&f| f == 0) {
            return Err(Error::Data(
                "every label must have frequency > 0 to build the tree".into(),
            ));
        }

        let mut nodes: Vec<Node> = (0..k)
            .map(|i| Node {
                kind: NodeKind::Leaf(i as LabelId),
            })
            .collect();

        // Min-heap keyed by (frequency, tie key). Leaves use their label id
        // as tie key; merged nodes use k + creation index, so equal-frequency
        // ties resolve to the lower label first, then creation order.
        let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = label_freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| Reverse((f, i, i)))
            .collect();
        let mut creation = 0usize;
        while heap.len() >= 2 {
            let Reverse((fa, _, a)) = heap.pop().expect("len checked");
            let Reverse((fb, _, b)) = heap.pop().expect("len checked");
            let idx = nodes.len();
            nodes.push(Node {
                kind: NodeKind::Internal { left: a, right: b },
            });
            heap.push(Reverse((fa + fb, k + creation, idx)));
            creation += 1;
        }
        let root = heap.pop().expect("one node remains").0 .2;
        let n_internal = k - 1;
        HuffmanTree::from_parts(nodes, root, vec![0.0; n_internal * dim], dim)
    }

    /// Assembles a tree from its node list and parameter block, recomputing
    /// internal indices and root-to-leaf paths. `thetas` holds the internal
    /// nodes' vectors in node order.
    pub(crate) fn from_parts(
        nodes: Vec<Node>,
        root: usize,
        thetas: Vec<f32>,
        dim: usize,
    ) -> Result<Self> {
        let mut internal_index = vec![usize::MAX; nodes.len()];
        let mut n_internal = 0usize;
        let mut leaf_labels: Vec<LabelId> = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Internal { .. } => {
                    internal_index[i] = n_internal;
                    n_internal += 1;
                }
                NodeKind::Leaf(label) => leaf_labels.push(label),
            }
        }
        let k = leaf_labels.len();
        leaf_labels.sort_unstable();
        if k < 2 || leaf_labels.iter().enumerate().any(|(i, &l)| l as usize != i) {
            return Err(Error::Data(
                "label tree leaves must carry dense label ids 0..K-1".into(),
            ));
        }
        if thetas.len() != n_internal * dim {
            return Err(Error::Data(format!(
                "label tree parameter block has {} values, expected {}",
                thetas.len(),
                n_internal * dim
            )));
        }

        // root-to-leaf paths: left = bit 1, right = bit 0
        let mut paths: Vec<Vec<PathStep>> = vec![Vec::new(); k];
        let mut stack: Vec<(usize, Vec<PathStep>)> = vec![(root, Vec::new())];
        while let Some((idx, path)) = stack.pop() {
            match &nodes[idx].kind {
                NodeKind::Leaf(label) => {
                    paths[*label as usize] = path;
                }
                NodeKind::Internal { left, right } => {
                    let internal = internal_index[idx];
                    let mut lp = path.clone();
                    lp.push(PathStep {
                        node: internal,
                        bit: 1,
                    });
                    stack.push((*left, lp));
                    let mut rp = path;
                    rp.push(PathStep {
                        node: internal,
                        bit: 0,
                    });
                    stack.push((*right, rp));
                }
            }
        }

        Ok(HuffmanTree {
            nodes,
            root,
            paths,
            thetas,
            internal_index,
            dim,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.paths.len()
    }

    pub fn num_internal(&self) -> usize {
        self.thetas.len() / self.dim.max(1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn path(&self, label: LabelId) -> &[PathStep] {
        &self.paths[label as usize]
    }

    pub fn depth(&self, label: LabelId) -> usize {
        self.paths[label as usize].len()
    }

    pub fn theta(&self, internal: usize) -> &[f32] {
        &self.thetas[internal * self.dim..(internal + 1) * self.dim]
    }

    pub(crate) fn theta_mut(&mut self, internal: usize) -> &mut [f32] {
        &mut self.thetas[internal * self.dim..(internal + 1) * self.dim]
    }

    /// Sum of frequency times depth; minimal over all prefix trees by
    /// Huffman's construction.
    pub fn weighted_code_length(&self, label_freqs: &[u64]) -> u64 {
        label_freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| f * self.depth(i as LabelId) as u64)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_tree_has_two_depth_one_leaves() {
        let tree = HuffmanTree::build(&[7, 3], 4).unwrap();
        assert_eq!(tree.depth(0), 1);
        assert_eq!(tree.depth(1), 1);
        assert_eq!(tree.num_internal(), 1);
        // codes are prefix-free and distinct
        assert_ne!(tree.path(0)[0].bit, tree.path(1)[0].bit);
    }

    #[test]
    fn three_label_depths() {
        // freqs {a:5, b:3, c:2} -> depths a=1, b=2, c=2
        let tree = HuffmanTree::build(&[5, 3, 2], 2).unwrap();
        assert_eq!(tree.depth(0), 1);
        assert_eq!(tree.depth(1), 2);
        assert_eq!(tree.depth(2), 2);
    }

    #[test]
    fn equal_freq_four_labels_balanced() {
        let tree = HuffmanTree::build(&[1, 1, 1, 1], 2).unwrap();
        for label in 0..4 {
            assert_eq!(tree.depth(label), 2);
        }
    }

    #[test]
    fn deterministic_construction() {
        let a = HuffmanTree::build(&[4, 4, 2, 2, 1], 3).unwrap();
        let b = HuffmanTree::build(&[4, 4, 2, 2, 1], 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn codes_are_prefix_free() {
        let tree = HuffmanTree::build(&[9, 5, 3, 2, 1, 1], 2).unwrap();
        let codes: Vec<Vec<u8>> = (0..6)
            .map(|l| tree.path(l).iter().map(|s| s.bit).collect())
            .collect();
        for i in 0..codes.len() {
            for j in 0..codes.len() {
                if i != j {
                    let shorter = codes[i].len().min(codes[j].len());
                    assert_ne!(
                        codes[i][..shorter],
                        codes[j][..shorter],
                        "code {i} is a prefix of {j}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(HuffmanTree::build(&[5], 2).is_err());
        assert!(HuffmanTree::build(&[], 2).is_err());
        assert!(HuffmanTree::build(&[3, 0], 2).is_err());
    }
}
