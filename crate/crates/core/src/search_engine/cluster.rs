//! Shard → node assignment persisted as `meta.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IndexError;

pub const META_FILE: &str = "meta.json";
pub const META_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardAssignment {
    pub shard_id: u32,
    pub node_id: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub node_id: u32,
    /// Storage directory, relative to the index root.
    pub path: String,
}

/// Index metadata: which simulated node stores each shard.
///
/// Each shard has exactly one copy (replica factor 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterMeta {
    pub format_version: u32,
    pub num_shards: u32,
    pub shards: Vec<ShardAssignment>,
    pub nodes: Vec<NodeInfo>,
}

impl ClusterMeta {
    /// Round-robin placement of `num_shards` shards over `num_nodes` nodes.
    pub fn new(num_shards: u32, num_nodes: u32) -> Result<Self, IndexError> {
        if num_shards == 0 {
            return Err(IndexError::InvalidLayout(
                "shard count must be at least 1".into(),
            ));
        }
        if num_nodes == 0 {
            return Err(IndexError::InvalidLayout(
                "node count must be at least 1".into(),
            ));
        }
        let num_nodes = num_nodes.min(num_shards);
        Ok(Self {
            format_version: META_FORMAT_VERSION,
            num_shards,
            shards: (0..num_shards)
                .map(|s| ShardAssignment {
                    shard_id: s,
                    node_id: s % num_nodes,
                })
                .collect(),
            nodes: (0..num_nodes)
                .map(|n| NodeInfo {
                    node_id: n,
                    path: format!("node-{n}"),
                })
                .collect(),
        })
    }

    pub fn validate(&self) -> Result<(), IndexError> {
        if self.format_version != META_FORMAT_VERSION {
            return Err(IndexError::InvalidLayout(format!(
                "unsupported meta format version {}",
                self.format_version
            )));
        }
        if self.num_shards == 0 || self.shards.len() != self.num_shards as usize {
            return Err(IndexError::InvalidLayout(format!(
                "{} shard assignments for {} shards",
                self.shards.len(),
                self.num_shards
            )));
        }
        for (i, a) in self.shards.iter().enumerate() {
            if a.shard_id as usize != i {
                return Err(IndexError::InvalidLayout(format!(
                    "shard assignments out of order at {i}"
                )));
            }
            if !self.nodes.iter().any(|n| n.node_id == a.node_id) {
                return Err(IndexError::InvalidLayout(format!(
                    "shard {} assigned to unknown node {}",
                    a.shard_id, a.node_id
                )));
            }
        }
        Ok(())
    }

    pub fn node_of(&self, shard_id: u32) -> u32 {
        self.shards[shard_id as usize].node_id
    }

    /// `<root>/<node path>/shard-<s>`.
    pub fn shard_dir(&self, root: &Path, shard_id: u32) -> PathBuf {
        let node = self.node_of(shard_id);
        let node_path = self
            .nodes
            .iter()
            .find(|n| n.node_id == node)
            .map(|n| n.path.clone())
            .unwrap_or_else(|| format!("node-{node}"));
        root.join(node_path).join(format!("shard-{shard_id}"))
    }
}
