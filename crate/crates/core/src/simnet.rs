//! Synchronous-round message-passing simulation of the distributed
//! algorithms.
//!
//! Each round, every agent posts one scalar and receives its neighbors'
//! posts; the network records every `(reader, owner)` pair. Re-implementing
//! a step out of these primitives and comparing against the dense
//! linear-algebra path proves both correctness and communication locality:
//! all recorded reads are one-hop, so a step that uses `r` rounds touches at
//! most the `r`-hop neighborhood.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use nalgebra::DVector;

use crate::graph::{Graph, LaplacianMatrix};
use crate::problems::AllocationProblem;

/// A graph plus an access log of neighbor reads.
pub struct SimNetwork {
    adjacency: Vec<Vec<usize>>,
    laplacian_rows: Vec<Vec<(usize, f64)>>,
    rounds: usize,
    reads: BTreeSet<(usize, usize)>,
}

impl SimNetwork {
    /// Agents own their Laplacian row of `l` restricted to `{i} ∪ 𝒩ᵢ`.
    pub fn new(graph: &Graph, l: &LaplacianMatrix) -> Self {
        let n = graph.n();
        let adjacency = graph.adjacency();
        let mut laplacian_rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = alloc::vec![(i, l.matrix()[(i, i)])];
            for &j in &adjacency[i] {
                row.push((j, l.matrix()[(i, j)]));
            }
            laplacian_rows.push(row);
        }
        Self { adjacency, laplacian_rows, rounds: 0, reads: BTreeSet::new() }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    /// Rounds executed so far.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// One synchronous round: agent `i` sees `values[j]` for `j ∈ 𝒩ᵢ` (and
    /// its own entry); every remote read is logged.
    pub fn exchange(&mut self, values: &[f64]) -> Vec<Vec<(usize, f64)>> {
        self.rounds += 1;
        let mut received = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            let mut inbox = alloc::vec![(i, values[i])];
            for &j in &self.adjacency[i] {
                self.reads.insert((i, j));
                inbox.push((j, values[j]));
            }
            received.push(inbox);
        }
        received
    }

    /// One neighbor exchange followed by the local weighted combination
    /// `(Lv)ᵢ = Σ_{j∈{i}∪𝒩ᵢ} Lᵢⱼ vⱼ`.
    pub fn laplacian_round(&mut self, values: &[f64]) -> Vec<f64> {
        let inboxes = self.exchange(values);
        let mut out = alloc::vec![0.0; self.n()];
        for i in 0..self.n() {
            let mut acc = 0.0;
            for &(j, lij) in &self.laplacian_rows[i] {
                let &(_, vj) = inboxes[i]
                    .iter()
                    .find(|&&(k, _)| k == j)
                    .expect("neighbor value present");
                acc += lij * vj;
            }
            out[i] = acc;
        }
        out
    }

    /// Every read logged so far is a one-hop pair.
    pub fn all_reads_one_hop(&self) -> bool {
        self.reads.iter().all(|&(i, j)| self.adjacency[i].contains(&j))
    }

    /// Largest hop distance between any logged (reader, owner) pair.
    pub fn max_read_distance(&self, graph: &Graph) -> usize {
        let mut worst = 0;
        for &(i, j) in &self.reads {
            let mut dist = usize::MAX;
            for k in 1..=graph.n() {
                if graph.k_hop_neighbors(i, k).contains(&j) {
                    dist = k;
                    break;
                }
            }
            worst = worst.max(dist);
        }
        worst
    }
}

/// The discrete approximate-Newton step executed purely through
/// message-passing rounds: `z⁺ = z − α A_q(L∇f)`, each series term built
/// from two one-hop rounds. Matches the dense implementation in exact
/// arithmetic; used to certify the locality claims.
pub fn dana_d_step_on_network(
    net: &mut SimNetwork,
    problem: &AllocationProblem,
    x: &DVector<f64>,
    z: &DVector<f64>,
    q: usize,
    alpha: f64,
) -> DVector<f64> {
    let n = net.n();
    let grads: Vec<f64> = (0..n).map(|i| problem.costs[i].grad(x[i])).collect();
    let hessians: Vec<f64> = (0..n).map(|i| problem.costs[i].hess(x[i])).collect();
    let mut y = net.laplacian_round(&grads);
    let mut direction = y.clone();
    for _ in 0..q {
        // y ← y − L(H(Ly)) via two one-hop rounds; H entries stay local
        let t = net.laplacian_round(&y);
        let s: Vec<f64> = (0..n).map(|i| hessians[i] * t[i]).collect();
        let u = net.laplacian_round(&s);
        for i in 0..n {
            y[i] -= u[i];
            direction[i] += y[i];
        }
    }
    DVector::from_iterator(n, (0..n).map(|i| z[i] - alpha * direction[i]))
}

/// The inner Laplacian-gradient flow step `p⁺ = p − η L g` on the network
/// (one exchange round); `g` holds each agent's local gradient value.
pub fn inner_flow_step_on_network(
    net: &mut SimNetwork,
    grads: &[f64],
    p: &DVector<f64>,
    eta: f64,
) -> DVector<f64> {
    let lg = net.laplacian_round(grads);
    DVector::from_iterator(p.len(), (0..p.len()).map(|i| p[i] - eta * lg[i]))
}
