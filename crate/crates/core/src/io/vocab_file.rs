//! Vocabulary container (`.svvb`):
//!
//! ```text
//! magic "SVVB" | version u32 = 1 | k u32 | L u32 | dim u32 = 256 |
//! node count u64 | count x { parent u64 (u64::MAX for the root),
//! leaf u8, word_id u64 (u64::MAX if internal), weight f64,
//! centroid 256 x f32 }
//! ```

use std::path::Path;

use super::{path_str, ByteReader, IoError};
use crate::matching::{Descriptor, DESCRIPTOR_DIM};
use crate::vocab::{VocabNode, VocabularyTree};

pub const VOCAB_MAGIC: &[u8; 4] = b"SVVB";
const VOCAB_VERSION: u32 = 1;
const NODE_BYTES: usize = 8 + 1 + 8 + 8 + 4 * DESCRIPTOR_DIM;
const NO_INDEX: u64 = u64::MAX;

pub fn encode_vocabulary(tree: &VocabularyTree) -> Vec<u8> {
    let nodes = tree.nodes();
    let mut out = Vec::with_capacity(24 + 8 + nodes.len() * NODE_BYTES);
    out.extend_from_slice(VOCAB_MAGIC);
    out.extend_from_slice(&VOCAB_VERSION.to_le_bytes());
    out.extend_from_slice(&tree.branching().to_le_bytes());
    out.extend_from_slice(&tree.depth().to_le_bytes());
    out.extend_from_slice(&(DESCRIPTOR_DIM as u32).to_le_bytes());
    out.extend_from_slice(&(nodes.len() as u64).to_le_bytes());
    for node in nodes {
        let parent = node.parent.map_or(NO_INDEX, u64::from);
        out.extend_from_slice(&parent.to_le_bytes());
        out.push(node.word_id.is_some() as u8);
        let word = node.word_id.map_or(NO_INDEX, u64::from);
        out.extend_from_slice(&word.to_le_bytes());
        out.extend_from_slice(&node.weight.to_le_bytes());
        for v in node.centroid.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_vocabulary(bytes: &[u8], origin: &str) -> Result<VocabularyTree, IoError> {
    let mut r = ByteReader::new(bytes, origin);
    r.magic(VOCAB_MAGIC)?;
    let version = r.u32("version")?;
    if version != VOCAB_VERSION {
        return Err(IoError::UnsupportedVersion {
            path: origin.to_string(),
            found: version,
            supported: VOCAB_VERSION,
        });
    }
    let branching = r.u32("branching factor")?;
    let depth = r.u32("depth")?;
    let dim = r.u32("descriptor dimension")?;
    if dim as usize != DESCRIPTOR_DIM {
        return Err(r.error(16, format!("descriptor dimension {dim}, expected {DESCRIPTOR_DIM}")));
    }
    let count = r.u64("node count")?;
    let count = r.check_count(count, NODE_BYTES, "node")?;

    let mut nodes = Vec::with_capacity(count);
    for i in 0..count {
        let node_offset = r.position();
        let parent = r.u64("parent")?;
        let leaf = r.u8("leaf flag")?;
        let word = r.u64("word id")?;
        let weight = r.f64("weight")?;
        let centroid = r.f32_slice(DESCRIPTOR_DIM, "centroid")?;

        let parent = if parent == NO_INDEX {
            None
        } else {
            let p = u32::try_from(parent)
                .map_err(|_| r.error(node_offset, format!("node {i}: parent {parent} out of range")))?;
            Some(p)
        };
        let word_id = match (leaf, word) {
            (0, w) if w == NO_INDEX => None,
            (1, w) if w != NO_INDEX => Some(u32::try_from(w).map_err(|_| {
                r.error(node_offset, format!("node {i}: word id {w} out of range"))
            })?),
            _ => {
                return Err(r.error(
                    node_offset,
                    format!("node {i}: leaf flag {leaf} inconsistent with word id {word}"),
                ))
            }
        };
        let centroid = Descriptor::from_slice(&centroid)
            .map_err(|e| r.error(node_offset, format!("node {i}: {e}")))?;
        nodes.push(VocabNode {
            parent,
            centroid,
            weight,
            word_id,
        });
    }
    r.expect_end()?;
    VocabularyTree::from_nodes(branching, depth, nodes).map_err(|e| IoError::MalformedFile {
        path: origin.to_string(),
        offset: 0,
        message: e.to_string(),
    })
}

pub fn write_vocabulary(path: &Path, tree: &VocabularyTree) -> Result<(), IoError> {
    Ok(std::fs::write(path, encode_vocabulary(tree))?)
}

pub fn read_vocabulary(path: &Path) -> Result<VocabularyTree, IoError> {
    let bytes = std::fs::read(path)?;
    decode_vocabulary(&bytes, &path_str(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_feature_set;
    use crate::vocab::train_vocabulary;

    #[test]
    fn vocabulary_round_trip_preserves_quantization() {
        let corpus: Vec<_> = (0..15)
            .map(|i| gen_feature_set(i, i as f64, 40, 752.0, 480.0, 0.0, 600 + i))
            .collect();
        let tree = train_vocabulary(&corpus, 3, 2, 12).unwrap();
        let bytes = encode_vocabulary(&tree);
        let back = decode_vocabulary(&bytes, "mem").unwrap();
        assert_eq!(back.nodes(), tree.nodes());
        // Bit-exact rewrite.
        assert_eq!(encode_vocabulary(&back), bytes);
        // Identical quantization over a probe set.
        let probe = gen_feature_set(0, 0.0, 1000, 752.0, 480.0, 0.0, 4242);
        for f in &probe.features {
            assert_eq!(tree.quantize(&f.descriptor), back.quantize(&f.descriptor));
        }
    }

    #[test]
    fn corrupted_tree_structure_is_rejected() {
        let corpus: Vec<_> = (0..4)
            .map(|i| gen_feature_set(i, i as f64, 20, 752.0, 480.0, 0.0, 20 + i))
            .collect();
        let tree = train_vocabulary(&corpus, 2, 1, 1).unwrap();
        let mut bytes = encode_vocabulary(&tree);
        // Flip node 1's leaf flag without giving it a word id.
        let node1 = 24 + 8 + NODE_BYTES + 8;
        bytes[node1] ^= 1;
        assert!(decode_vocabulary(&bytes, "mem").is_err());
    }
}
