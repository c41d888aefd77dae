use std::io::Write;

use super::node::{Direction, FederatedMessage};

pub const LEDGER_CSV_HEADER: &str = "iter,node,upload_scalars,download_scalars";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerRow {
    pub iter: usize,
    pub node: usize,
    pub upload_scalars: u64,
    pub download_scalars: u64,
}

/// Scalars exchanged by every node in every iteration; iteration 0 covers
/// the threshold round, initialization and the first broadcast of `U`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunicationLedger {
    pub rows: Vec<LedgerRow>,
}

impl CommunicationLedger {
    pub fn from_messages(node_count: usize, messages: &[FederatedMessage]) -> Self {
        let iterations = messages.iter().map(|m| m.iter + 1).max().unwrap_or(0);
        let mut rows: Vec<LedgerRow> = (0..iterations)
            .flat_map(|iter| {
                (0..node_count).map(move |node| LedgerRow {
                    iter,
                    node,
                    upload_scalars: 0,
                    download_scalars: 0,
                })
            })
            .collect();
        for msg in messages {
            let base = msg.iter * node_count;
            match (msg.direction, msg.node) {
                (Direction::NodeToCoordinator, Some(node)) => rows[base + node].upload_scalars += msg.scalar_count,
                (Direction::CoordinatorToNode, Some(node)) => rows[base + node].download_scalars += msg.scalar_count,
                (Direction::CoordinatorToNode, None) => {
                    for row in &mut rows[base..base + node_count] {
                        row.download_scalars += msg.scalar_count;
                    }
                }
                (Direction::NodeToCoordinator, None) => {}
            }
        }
        Self { rows }
    }

    pub fn node_count(&self) -> usize {
        self.rows.iter().map(|r| r.node + 1).max().unwrap_or(0)
    }

    /// Total uploaded scalars in iteration `iter`, over all nodes.
    pub fn upload_total(&self, iter: usize) -> u64 {
        self.rows.iter().filter(|r| r.iter == iter).map(|r| r.upload_scalars).sum()
    }

    pub fn download_total(&self, iter: usize) -> u64 {
        self.rows.iter().filter(|r| r.iter == iter).map(|r| r.download_scalars).sum()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{LEDGER_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.iter, r.node, r.upload_scalars, r.download_scalars)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }
}
