//! Vertically federated AltGDmin: columns and their sketches live on `N`
//! nodes; a coordinator aggregates partial sums, runs the QR step and
//! broadcasts `U`. Every exchange is logged with its exact scalar count.
//!
//! Partial sums travel as exact accumulators, so the coordinator's totals
//! are the same correctly rounded values the single-machine solver
//! produces. A federated trace is therefore bit-identical to the
//! centralized one for every node count and partition policy.

mod ledger;
mod node;
mod partition;

pub use ledger::{CommunicationLedger, LedgerRow, LEDGER_CSV_HEADER};
pub use node::{Direction, FederatedMessage, Payload, PayloadKind};
pub use partition::{partition_columns, NodeAssignment, PartitionPolicy};

use thiserror::Error;

use crate::linalg::{ExactMatrixSum, ExactSum, Matrix, OrthonormalBasis};
use crate::model::{GroundTruth, Phase, PhaseLabel, SketchSet};
use crate::solver::{drive, Backend, ConvergenceTrace, FactorEstimate, SolverConfig, SolverError};
use node::Node;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FederationError {
    #[error("cannot spread {q} columns over {nodes} nodes (need 1 ≤ nodes ≤ q)")]
    TooManyNodes { q: usize, nodes: usize },
    #[error("assignment does not match the data: {0}")]
    AssignmentMismatch(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn check_assignment(assignment: &NodeAssignment, q: usize) -> Result<(), FederationError> {
    if assignment.q() != q {
        return Err(FederationError::AssignmentMismatch(format!(
            "assignment covers {} columns, data has {q}",
            assignment.q()
        )));
    }
    Ok(())
}

/// One gradient round: every node uploads the `n x r` partial gradient of
/// its own columns and the coordinator adds them in ascending node order.
/// The log closes with the broadcast of the basis the round used.
pub fn federated_gradient_round(
    u: &OrthonormalBasis,
    b: &Matrix,
    assignment: &NodeAssignment,
    gd_phase: &Phase,
) -> Result<(Matrix, Vec<FederatedMessage>), FederationError> {
    check_assignment(assignment, gd_phase.q())?;
    if b.shape() != (u.rank(), gd_phase.q()) {
        return Err(SolverError::DimensionMismatch(format!(
            "B is {:?}, expected {}x{}",
            b.shape(),
            u.rank(),
            gd_phase.q()
        ))
        .into());
    }
    if u.dim() != gd_phase.n() {
        return Err(SolverError::DimensionMismatch(format!(
            "basis has {} rows but sketches have {} columns",
            u.dim(),
            gd_phase.n()
        ))
        .into());
    }
    let mut log = Vec::with_capacity(assignment.node_count() + 1);
    let mut total = ExactMatrixSum::zeros(u.dim(), u.rank());
    for id in 0..assignment.node_count() {
        let node = Node::from_phase(id, assignment.columns(id), gd_phase);
        let msg = node.partial_gradient_with(u, b, gd_phase.label, 0)?;
        if let Some(Payload::PartialGradient(partial)) = &msg.payload {
            total.merge(partial);
        }
        log.push(msg.without_payload());
    }
    let grad = total.value();
    log.push(FederatedMessage::broadcast(0, Payload::BroadcastU(u.matrix().clone())).without_payload());
    Ok((grad, log))
}

struct FederatedBackend<'a> {
    sketches: &'a SketchSet,
    nodes: Vec<Node<'a>>,
    iter: usize,
    messages: Vec<FederatedMessage>,
}

impl FederatedBackend<'_> {
    fn deliver(&mut self, msg: FederatedMessage) -> FederatedMessage {
        self.messages.push(msg.without_payload());
        msg
    }
}

impl Backend for FederatedBackend<'_> {
    fn sketches(&self) -> &SketchSet {
        self.sketches
    }

    fn sum_of_squares(&mut self) -> Result<f64, SolverError> {
        let mut total = ExactSum::new();
        for i in 0..self.nodes.len() {
            let msg = self.nodes[i].partial_alpha(PhaseLabel::Alpha)?;
            if let Some(Payload::PartialAlpha(p)) = &self.deliver(msg).payload {
                total.merge(p);
            }
        }
        Ok(total.value())
    }

    fn init_matrix(&mut self, alpha: f64) -> Result<Matrix, SolverError> {
        self.deliver(FederatedMessage::broadcast(0, Payload::BroadcastAlpha(alpha)));
        let n = self.sketches.n;
        let mut x0 = Matrix::zeros(n, self.sketches.q);
        for i in 0..self.nodes.len() {
            let msg = self.nodes[i].init_columns(PhaseLabel::Init, alpha)?;
            if let Some(Payload::PartialInitColumns(cols)) = &self.deliver(msg).payload {
                for (k, col) in cols {
                    x0.set_column(*k, col);
                }
            }
        }
        Ok(x0)
    }

    fn broadcast(&mut self, iter: usize, u: &OrthonormalBasis) {
        self.iter = iter;
        self.deliver(FederatedMessage::broadcast(iter, Payload::BroadcastU(u.matrix().clone())));
    }

    fn min_step(&mut self, u: &OrthonormalBasis, label: PhaseLabel) -> Result<Matrix, SolverError> {
        // Coefficients stay on their nodes; the full B is gathered here only
        // for evaluation and is not part of the protocol.
        let mut b = Matrix::zeros(u.rank(), self.sketches.q);
        for node in &mut self.nodes {
            node.min_step(u, label)?;
            for (k, bk) in node.coefficients() {
                b.set_column(k, bk);
            }
        }
        Ok(b)
    }

    fn gradient(&mut self, u: &OrthonormalBasis, _b: &Matrix, label: PhaseLabel) -> Result<Matrix, SolverError> {
        let mut total = ExactMatrixSum::zeros(u.dim(), u.rank());
        for i in 0..self.nodes.len() {
            let msg = self.nodes[i].partial_gradient(u, label, self.iter + 1)?;
            if let Some(Payload::PartialGradient(p)) = &self.deliver(msg).payload {
                total.merge(p);
            }
        }
        Ok(total.value())
    }
}

/// Runs AltGDmin over `assignment`. Returns the same estimate and trace as
/// [`crate::solver::run_altgdmin`] plus the per-node communication ledger.
pub fn run_federated_altgdmin(
    cfg: &SolverConfig,
    sketches: &SketchSet,
    assignment: &NodeAssignment,
    gt: Option<&GroundTruth>,
) -> Result<(FactorEstimate, ConvergenceTrace, CommunicationLedger), FederationError> {
    check_assignment(assignment, sketches.q)?;
    let nodes = (0..assignment.node_count())
        .map(|id| Node::new(id, assignment.columns(id), sketches))
        .collect();
    let mut backend = FederatedBackend {
        sketches,
        nodes,
        iter: 0,
        messages: Vec::new(),
    };
    let (estimate, trace) = drive(cfg, &mut backend, gt)?;
    let ledger = CommunicationLedger::from_messages(assignment.node_count(), &backend.messages);
    Ok((estimate, trace, ledger))
}
