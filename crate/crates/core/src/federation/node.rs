use crate::linalg::{ExactMatrixSum, ExactSum, Matrix, OrthonormalBasis, Vector};
use crate::model::{ColumnSketch, Phase, PhaseLabel, SketchSet};
use crate::solver::{column_init, SolverError};
use crate::solver::{accumulate_gradient, solve_columns, ProductCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    NodeToCoordinator,
    CoordinatorToNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    PartialAlpha,
    PartialInitColumns,
    PartialGradient,
    BroadcastAlpha,
    BroadcastU,
}

/// Message contents. Partial sums are carried as exact accumulators: each
/// stands for one real number, and is counted as one scalar.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Payload {
    PartialAlpha(ExactSum),
    PartialInitColumns(Vec<(usize, Vector)>),
    PartialGradient(ExactMatrixSum),
    BroadcastAlpha(f64),
    BroadcastU(Matrix),
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::PartialAlpha(_) => PayloadKind::PartialAlpha,
            Payload::PartialInitColumns(_) => PayloadKind::PartialInitColumns,
            Payload::PartialGradient(_) => PayloadKind::PartialGradient,
            Payload::BroadcastAlpha(_) => PayloadKind::BroadcastAlpha,
            Payload::BroadcastU(_) => PayloadKind::BroadcastU,
        }
    }

    /// Number of real scalars the payload carries.
    pub fn scalar_count(&self) -> u64 {
        match self {
            Payload::PartialAlpha(_) | Payload::BroadcastAlpha(_) => 1,
            Payload::PartialInitColumns(cols) => cols.iter().map(|(_, c)| c.len() as u64).sum(),
            Payload::PartialGradient(g) => {
                let (r, c) = g.shape();
                (r * c) as u64
            }
            Payload::BroadcastU(u) => u.len() as u64,
        }
    }
}

/// One exchange between a node and the coordinator. Broadcasts have no
/// `node` and reach every node.
#[derive(Debug, Clone)]
pub struct FederatedMessage {
    pub iter: usize,
    pub node: Option<usize>,
    pub direction: Direction,
    pub kind: PayloadKind,
    pub scalar_count: u64,
    pub payload: Option<Payload>,
}

impl FederatedMessage {
    pub fn upload(iter: usize, node: usize, payload: Payload) -> Self {
        Self {
            iter,
            node: Some(node),
            direction: Direction::NodeToCoordinator,
            kind: payload.kind(),
            scalar_count: payload.scalar_count(),
            payload: Some(payload),
        }
    }

    pub fn broadcast(iter: usize, payload: Payload) -> Self {
        Self {
            iter,
            node: None,
            direction: Direction::CoordinatorToNode,
            kind: payload.kind(),
            scalar_count: payload.scalar_count(),
            payload: Some(payload),
        }
    }

    /// The header only, for logs.
    pub fn without_payload(&self) -> Self {
        Self {
            payload: None,
            ..self.clone()
        }
    }
}

type Columns<'a> = Vec<(usize, &'a ColumnSketch)>;

/// A worker holding the sketches of its own columns and nothing else. It
/// only ever sees `U` and `α` from the coordinator.
pub(crate) struct Node<'a> {
    id: usize,
    shared: bool,
    phases: Vec<(PhaseLabel, Columns<'a>)>,
    coefficients: Vec<Vector>,
    cache: ProductCache,
}

fn own_columns<'a>(phase: &'a Phase, columns: &[usize]) -> Columns<'a> {
    columns.iter().map(|&k| (k, &phase.columns[k])).collect()
}

impl<'a> Node<'a> {
    pub(crate) fn new(id: usize, columns: &[usize], sketches: &'a SketchSet) -> Self {
        Self {
            id,
            shared: !sketches.is_split(),
            phases: sketches
                .phases
                .iter()
                .map(|p| (p.label, own_columns(p, columns)))
                .collect(),
            coefficients: Vec::new(),
            cache: ProductCache::default(),
        }
    }

    /// A node whose single measurement set serves every label.
    pub(crate) fn from_phase(id: usize, columns: &[usize], phase: &'a Phase) -> Self {
        Self {
            id,
            shared: true,
            phases: vec![(phase.label, own_columns(phase, columns))],
            coefficients: Vec::new(),
            cache: ProductCache::default(),
        }
    }

    fn local(&self, label: PhaseLabel) -> Result<&Columns<'a>, SolverError> {
        let found = if self.shared {
            self.phases.first()
        } else {
            self.phases.iter().find(|(l, _)| *l == label)
        };
        let (_, cols) = found.ok_or(SolverError::MissingPhase(label))?;
        if cols.is_empty() || cols[0].1.y.is_empty() {
            return Err(SolverError::EmptyPhase(label));
        }
        Ok(cols)
    }

    pub(crate) fn partial_alpha(&self, label: PhaseLabel) -> Result<FederatedMessage, SolverError> {
        let mut acc = ExactSum::new();
        for (_, c) in self.local(label)? {
            for v in c.y.iter() {
                acc.add(v * v);
            }
        }
        Ok(FederatedMessage::upload(0, self.id, Payload::PartialAlpha(acc)))
    }

    pub(crate) fn init_columns(&self, label: PhaseLabel, alpha: f64) -> Result<FederatedMessage, SolverError> {
        let cols = self
            .local(label)?
            .iter()
            .map(|(k, c)| (*k, column_init(c, alpha)))
            .collect();
        Ok(FederatedMessage::upload(0, self.id, Payload::PartialInitColumns(cols)))
    }

    /// Solves the least-squares problems of the node's columns and keeps the
    /// coefficients locally.
    pub(crate) fn min_step(&mut self, u: &OrthonormalBasis, label: PhaseLabel) -> Result<(), SolverError> {
        let cols = self.local(label)?;
        let (b, products) = solve_columns(cols.iter().copied(), u)?;
        self.cache.store(label, u, products);
        self.coefficients = b;
        Ok(())
    }

    /// `(k, b_k)` for the node's columns after the last min step.
    pub(crate) fn coefficients(&self) -> impl Iterator<Item = (usize, &Vector)> {
        self.phases[0].1.iter().map(|(k, _)| *k).zip(self.coefficients.iter())
    }

    /// Partial gradient over the node's columns using its own coefficients.
    pub(crate) fn partial_gradient(
        &self,
        u: &OrthonormalBasis,
        label: PhaseLabel,
        iter: usize,
    ) -> Result<FederatedMessage, SolverError> {
        let cols = self.local(label)?;
        let acc = accumulate_gradient(cols, &self.coefficients, self.cache.lookup(label, u), u);
        Ok(FederatedMessage::upload(iter, self.id, Payload::PartialGradient(acc)))
    }

    /// Partial gradient with coefficients taken from the columns of `b`.
    pub(crate) fn partial_gradient_with(
        &self,
        u: &OrthonormalBasis,
        b: &Matrix,
        label: PhaseLabel,
        iter: usize,
    ) -> Result<FederatedMessage, SolverError> {
        let cols = self.local(label)?;
        let coefficients: Vec<Vector> = cols.iter().map(|(k, _)| b.column(*k).into_owned()).collect();
        let acc = accumulate_gradient(cols, &coefficients, None, u);
        Ok(FederatedMessage::upload(iter, self.id, Payload::PartialGradient(acc)))
    }
}
