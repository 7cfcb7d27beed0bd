//! Kagome lattice of qubits on the edges of a honeycomb of three-port couplers,
//! the coupler state machine and the remote-gate planner.
//!
//! Cell `(r, c)` holds an up-coupler `A(r, c)` whose port `p` attaches qubit
//! `3 (r · cols + c) + p - 1`. The down-coupler `B(r, c)` joins port 1 of
//! `A(r, c)`, port 2 of `A(r, c + 1)` and port 3 of `A(r + 1, c)`; it is present
//! whenever at least two of those cells are. A port whose cell lies outside the
//! patch gets a boundary qubit of its own, numbered from `3 · rows · cols` on in
//! coupler order. Without these the far corner cell of every open patch would be
//! cut off. Each qubit carries the same port label on all of its couplers.
//! Coupler ids number the `A` couplers row-major first, then the `B` couplers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circulator::{weak_index_for_pair, CirculatorError};
use crate::qdynamics::{
    build_hamiltonian, evolve, rwa_transfer_time, transfer_report, Integrator, QuantumError, Qubit, SystemSpec,
    TransferReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("lattice needs rows, cols >= 1, got {0} x {1}")]
    Dimensions(usize, usize),
    #[error("unknown qubit {0}")]
    UnknownQubit(usize),
    #[error("unknown coupler {0}")]
    UnknownCoupler(usize),
    #[error("route endpoints coincide at qubit {0}")]
    SameQubit(usize),
    #[error("qubit {to} is unreachable from qubit {from}")]
    Unreachable { from: usize, to: usize },
    #[error("qubits {0} and {1} do not share a coupler")]
    NotAdjacent(usize, usize),
    #[error("illegal transition on coupler {coupler}: {from:?} -> {to:?}")]
    IllegalTransition { coupler: usize, from: CouplerState, to: CouplerState },
    #[error("ports {ports:?} are not the pair selected by k = {k}")]
    PairMismatch { k: usize, ports: (usize, usize) },
    #[error("port permutation {0:?} is not a permutation of 1, 2, 3")]
    Permutation([usize; 3]),
    #[error(transparent)]
    Circulator(#[from] CirculatorError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplerKind {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupler {
    pub id: usize,
    pub kind: CouplerKind,
    pub row: usize,
    pub col: usize,
    /// Qubit attached to port `p` at index `p - 1`.
    pub ports: [usize; 3],
}

impl Coupler {
    pub fn label(&self) -> String {
        let tag = match self.kind {
            CouplerKind::Up => 'A',
            CouplerKind::Down => 'B',
        };
        format!("{tag}({},{})", self.row, self.col)
    }

    /// Port (1-based) at which `qubit` is attached.
    pub fn port_of(&self, qubit: usize) -> Option<usize> {
        self.ports.iter().position(|&q| q == qubit).map(|i| i + 1)
    }
}

/// `Off` is the flux-detuned state; `On` records the weakened junction `k`
/// and the coupled port pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplerState {
    Off,
    On { k: usize, ports: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub rows: usize,
    pub cols: usize,
    pub couplers: Vec<Coupler>,
    /// Couplers of each qubit, ascending.
    pub qubit_couplers: Vec<Vec<usize>>,
    pub coupler_states: Vec<CouplerState>,
}

pub fn build_kagome(rows: usize, cols: usize) -> Result<Lattice, LatticeError> {
    if rows == 0 || cols == 0 {
        return Err(LatticeError::Dimensions(rows, cols));
    }
    let qubit = |r: usize, c: usize, p: usize| 3 * (r * cols + c) + p - 1;
    let mut couplers = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let ports = [qubit(r, c, 1), qubit(r, c, 2), qubit(r, c, 3)];
            couplers.push(Coupler { id: couplers.len(), kind: CouplerKind::Up, row: r, col: c, ports });
        }
    }
    let mut next_boundary = 3 * rows * cols;
    for r in 0..rows {
        for c in 0..cols {
            let right = c + 1 < cols;
            let below = r + 1 < rows;
            if !right && !below {
                continue;
            }
            let mut attach = |present: bool, q: usize| {
                if present {
                    q
                } else {
                    next_boundary += 1;
                    next_boundary - 1
                }
            };
            let ports = [qubit(r, c, 1), attach(right, qubit(r, c + 1, 2)), attach(below, qubit(r + 1, c, 3))];
            couplers.push(Coupler { id: couplers.len(), kind: CouplerKind::Down, row: r, col: c, ports });
        }
    }
    let mut qubit_couplers = vec![Vec::new(); next_boundary];
    for cp in &couplers {
        for &q in &cp.ports {
            qubit_couplers[q].push(cp.id);
        }
    }
    let coupler_states = vec![CouplerState::Off; couplers.len()];
    Ok(Lattice { rows, cols, couplers, qubit_couplers, coupler_states })
}

/// Qubit adjacency: neighbors of each qubit, indexed by qubit id.
pub type QubitGraph = Vec<BTreeSet<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyEntry {
    pub qubit: usize,
    pub couplers: Vec<usize>,
    pub neighbors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeExport {
    pub rows: usize,
    pub cols: usize,
    pub couplers: Vec<Coupler>,
    pub adjacency: Vec<AdjacencyEntry>,
}

impl Lattice {
    pub fn n_qubits(&self) -> usize {
        self.qubit_couplers.len()
    }

    /// Qubits owned by unit cells, `3 · rows · cols`; the rest are boundary sites.
    pub fn cell_qubits(&self) -> usize {
        3 * self.rows * self.cols
    }

    pub fn coupler(&self, id: usize) -> Result<&Coupler, LatticeError> {
        self.couplers.get(id).ok_or(LatticeError::UnknownCoupler(id))
    }

    fn check_qubit(&self, q: usize) -> Result<(), LatticeError> {
        if q < self.n_qubits() {
            Ok(())
        } else {
            Err(LatticeError::UnknownQubit(q))
        }
    }

    /// The coupler joining two qubits, if any. Two edges of the honeycomb share
    /// at most one vertex, so it is unique.
    pub fn shared_coupler(&self, a: usize, b: usize) -> Option<usize> {
        let cb = self.qubit_couplers.get(b)?;
        self.qubit_couplers.get(a)?.iter().copied().find(|c| cb.contains(c))
    }

    pub fn qubit_adjacency(&self) -> QubitGraph {
        let mut graph = vec![BTreeSet::new(); self.n_qubits()];
        for cp in &self.couplers {
            for &a in &cp.ports {
                for &b in &cp.ports {
                    if a != b {
                        graph[a].insert(b);
                    }
                }
            }
        }
        graph
    }

    /// Qubits attached to two couplers.
    pub fn interior_qubits(&self) -> Vec<usize> {
        (0..self.n_qubits()).filter(|&q| self.qubit_couplers[q].len() == 2).collect()
    }

    pub fn export(&self) -> LatticeExport {
        let graph = self.qubit_adjacency();
        let adjacency = graph
            .iter()
            .enumerate()
            .map(|(q, n)| AdjacencyEntry {
                qubit: q,
                couplers: self.qubit_couplers[q].clone(),
                neighbors: n.iter().copied().collect(),
            })
            .collect();
        LatticeExport { rows: self.rows, cols: self.cols, couplers: self.couplers.clone(), adjacency }
    }

    /// Relabels the ports of one coupler: the qubit on old port `p` moves to
    /// port `perm[p - 1]`.
    pub fn permute_ports(&self, coupler: usize, perm: [usize; 3]) -> Result<Lattice, LatticeError> {
        let mut sorted = perm;
        sorted.sort_unstable();
        if sorted != [1, 2, 3] {
            return Err(LatticeError::Permutation(perm));
        }
        let mut out = self.clone();
        let cp = out.couplers.get_mut(coupler).ok_or(LatticeError::UnknownCoupler(coupler))?;
        let old = cp.ports;
        for (p, &q) in old.iter().enumerate() {
            cp.ports[perm[p] - 1] = q;
        }
        Ok(out)
    }

    /// Returns the lattice with `coupler` moved to `new`. Only `Off -> On` and
    /// `On -> Off` are legal; an `On` state must pair the ports selected by `k`.
    pub fn set_coupler_state(&self, coupler: usize, new: CouplerState) -> Result<Lattice, LatticeError> {
        self.coupler(coupler)?;
        let current = self.coupler_states[coupler];
        match (current, new) {
            (CouplerState::Off, CouplerState::On { k, ports }) => {
                if weak_index_for_pair(ports.0, ports.1)? != k {
                    return Err(LatticeError::PairMismatch { k, ports });
                }
            }
            (CouplerState::On { .. }, CouplerState::Off) => {}
            _ => return Err(LatticeError::IllegalTransition { coupler, from: current, to: new }),
        }
        let mut out = self.clone();
        out.coupler_states[coupler] = new;
        Ok(out)
    }
}

/// Breadth-first shortest path, expanding neighbors in ascending id order.
pub fn shortest_path(graph: &QubitGraph, from: usize, to: usize) -> Option<Vec<usize>> {
    let mut parent = vec![usize::MAX; graph.len()];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(q) = queue.pop_front() {
        if q == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &n in &graph[q] {
            if parent[n] == usize::MAX {
                parent[n] = q;
                queue.push_back(n);
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Engage,
    Gate,
    Disengage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleStep {
    pub step: usize,
    pub coupler: usize,
    pub k: usize,
    pub qubits: [usize; 2],
    pub action: Action,
}

/// Sequential schedule; serializes as a bare JSON array of steps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateSchedule {
    pub steps: Vec<ScheduleStep>,
}

impl GateSchedule {
    pub fn gate_count(&self) -> usize {
        self.steps.iter().filter(|s| s.action == Action::Gate).count()
    }

    fn push(&mut self, coupler: usize, k: usize, qubits: [usize; 2], action: Action) {
        let step = self.steps.len();
        self.steps.push(ScheduleStep { step, coupler, k, qubits, action });
    }
}

/// Engage/gate/disengage triples along a shortest path from `from` to `to`.
pub fn plan_route(lat: &Lattice, from: usize, to: usize) -> Result<GateSchedule, LatticeError> {
    lat.check_qubit(from)?;
    lat.check_qubit(to)?;
    if from == to {
        return Err(LatticeError::SameQubit(from));
    }
    let path = shortest_path(&lat.qubit_adjacency(), from, to).ok_or(LatticeError::Unreachable { from, to })?;
    let mut schedule = GateSchedule::default();
    for hop in path.windows(2) {
        let (a, b) = (hop[0], hop[1]);
        let coupler = lat.shared_coupler(a, b).ok_or(LatticeError::NotAdjacent(a, b))?;
        let cp = lat.coupler(coupler)?;
        let ports = (cp.port_of(a).expect("attached"), cp.port_of(b).expect("attached"));
        let k = weak_index_for_pair(ports.0, ports.1)?;
        for action in [Action::Engage, Action::Gate, Action::Disengage] {
            schedule.push(coupler, k, [a, b], action);
        }
    }
    Ok(schedule)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownCoupler,
    QubitNotOnCoupler,
    StepOutOfOrder,
    DoubleBooked,
    PairMismatch,
    ConcurrentEngagement,
    GateOnIdleCoupler,
    DisengageIdleCoupler,
    DisconnectedGates,
    MissingDisengage,
}

impl ViolationKind {
    pub fn message(self) -> &'static str {
        match self {
            ViolationKind::UnknownCoupler => "unknown coupler",
            ViolationKind::QubitNotOnCoupler => "qubit not on coupler",
            ViolationKind::StepOutOfOrder => "step index out of order",
            ViolationKind::DoubleBooked => "coupler double-booked",
            ViolationKind::PairMismatch => "pair/k mismatch",
            ViolationKind::ConcurrentEngagement => "concurrent engagement",
            ViolationKind::GateOnIdleCoupler => "gate on non-engaged coupler",
            ViolationKind::DisengageIdleCoupler => "disengage of idle coupler",
            ViolationKind::DisconnectedGates => "consecutive gates do not share exactly one qubit",
            ViolationKind::MissingDisengage => "missing disengage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending step, or `None` for end-of-schedule checks.
    pub step: Option<usize>,
    pub coupler: Option<usize>,
    pub kind: ViolationKind,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.kind.message())?;
        if let Some(c) = self.coupler {
            write!(f, " (coupler {c})")?;
        }
        if let Some(s) = self.step {
            write!(f, " at step {s}")?;
        }
        Ok(())
    }
}

/// Replays `schedule` from an all-off lattice and lists every violation.
pub fn validate_schedule(lat: &Lattice, schedule: &GateSchedule) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let mut flag = |step: Option<usize>, coupler: Option<usize>, kind| violations.push(Violation { step, coupler, kind });
    let mut engaged: BTreeMap<usize, (usize, BTreeSet<usize>)> = BTreeMap::new();
    let mut last_gate: Option<BTreeSet<usize>> = None;

    for (i, s) in schedule.steps.iter().enumerate() {
        let at = Some(i);
        if s.step != i {
            flag(at, Some(s.coupler), ViolationKind::StepOutOfOrder);
        }
        let Some(cp) = lat.couplers.get(s.coupler) else {
            flag(at, Some(s.coupler), ViolationKind::UnknownCoupler);
            continue;
        };
        let (Some(pa), Some(pb)) = (cp.port_of(s.qubits[0]), cp.port_of(s.qubits[1])) else {
            flag(at, Some(s.coupler), ViolationKind::QubitNotOnCoupler);
            continue;
        };
        let pair: BTreeSet<usize> = s.qubits.into_iter().collect();
        match s.action {
            Action::Engage => {
                if weak_index_for_pair(pa, pb).ok() != Some(s.k) {
                    flag(at, Some(s.coupler), ViolationKind::PairMismatch);
                }
                if engaged.contains_key(&s.coupler) {
                    flag(at, Some(s.coupler), ViolationKind::DoubleBooked);
                } else if !engaged.is_empty() {
                    flag(at, Some(s.coupler), ViolationKind::ConcurrentEngagement);
                }
                engaged.insert(s.coupler, (s.k, pair));
            }
            Action::Gate => {
                if engaged.get(&s.coupler) != Some(&(s.k, pair.clone())) {
                    flag(at, Some(s.coupler), ViolationKind::GateOnIdleCoupler);
                }
                if let Some(prev) = &last_gate {
                    if prev.intersection(&pair).count() != 1 {
                        flag(at, Some(s.coupler), ViolationKind::DisconnectedGates);
                    }
                }
                last_gate = Some(pair);
            }
            Action::Disengage => {
                if engaged.remove(&s.coupler).is_none() {
                    flag(at, Some(s.coupler), ViolationKind::DisengageIdleCoupler);
                }
            }
        }
    }
    for &c in engaged.keys() {
        flag(None, Some(c), ViolationKind::MissingDisengage);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Runs a resonant single-photon transfer across the two ports engaged by
/// `step`, with the third port dark: `g/ω = coupling_ratio`, cutoff `fock_cutoff`.
pub fn hop_transfer(
    lat: &Lattice,
    step: &ScheduleStep,
    coupling_ratio: f64,
    fock_cutoff: usize,
) -> Result<TransferReport, LatticeError> {
    let cp = lat.coupler(step.coupler)?;
    let port = |q: usize| cp.port_of(q).ok_or(LatticeError::NotAdjacent(q, step.coupler));
    let pair = (port(step.qubits[0])?, port(step.qubits[1])?);
    let sys = build_hamiltonian(SystemSpec::resonant(pair, fock_cutoff, 1.0, coupling_ratio))?;
    let mut occ = vec![0; 3];
    occ[pair.0 - 1] = 1;
    let psi = sys.fock_state(Qubit::Ground, &occ)?;
    let sys = sys.with_state(psi);
    let t_star = rwa_transfer_time(coupling_ratio);
    let traj = evolve(&sys, 1.2 * t_star, t_star / 500.0, Integrator::Spectral)?;
    Ok(transfer_report(&traj)?)
}
