use serde::{Deserialize, Serialize};

use super::FederationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionPolicy {
    /// Consecutive blocks; earlier nodes take one extra column when `q` is
    /// not a multiple of the node count.
    Contiguous,
    /// Column `k` goes to node `k mod N`.
    RoundRobin,
}

/// Exact partition of the column indices `0..q` over `N` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeAssignment {
    owner: Vec<usize>,
    columns: Vec<Vec<usize>>,
}

impl NodeAssignment {
    pub fn node_count(&self) -> usize {
        self.columns.len()
    }

    pub fn q(&self) -> usize {
        self.owner.len()
    }

    /// Columns held by `node`, ascending.
    pub fn columns(&self, node: usize) -> &[usize] {
        &self.columns[node]
    }

    pub fn owner(&self, column: usize) -> usize {
        self.owner[column]
    }
}

pub fn partition_columns(
    q: usize,
    node_count: usize,
    policy: PartitionPolicy,
) -> Result<NodeAssignment, FederationError> {
    if node_count == 0 || node_count > q {
        return Err(FederationError::TooManyNodes { q, nodes: node_count });
    }
    let owner: Vec<usize> = match policy {
        PartitionPolicy::RoundRobin => (0..q).map(|k| k % node_count).collect(),
        PartitionPolicy::Contiguous => {
            let base = q / node_count;
            let extra = q % node_count;
            (0..node_count)
                .flat_map(|j| std::iter::repeat_n(j, base + usize::from(j < extra)))
                .collect()
        }
    };
    let mut columns = vec![Vec::new(); node_count];
    for (k, &j) in owner.iter().enumerate() {
        columns[j].push(k);
    }
    Ok(NodeAssignment { owner, columns })
}
