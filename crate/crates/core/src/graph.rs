//! Undirected weighted communication graphs, their Laplacians, spectral
//! summaries, and the coordinate projection used by the reduced Hessian.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::math;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("node id {0} out of range for n={1}")]
    NodeOutOfRange(usize, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("non-positive weight on edge ({0}, {1})")]
    NonPositiveWeight(usize, usize),
    #[error("edge count {m} infeasible for n={n} (need n-1 <= m <= n(n-1)/2)")]
    InfeasibleEdgeCount { n: usize, m: usize },
    #[error("malformed edge-list input: {0}")]
    Parse(String),
}

/// Undirected weighted graph on nodes `0..n`.
///
/// Edges are stored as ordered pairs `(i, j)` with `i < j`; weights are
/// strictly positive. Immutable after construction; deserialization goes
/// through the same validation as the constructors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawGraph", into = "RawGraph"))]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

/// Wire form of [`Graph`]; conversion re-runs the invariant checks.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RawGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

impl From<Graph> for RawGraph {
    fn from(g: Graph) -> Self {
        Self { n: g.n, edges: g.edges, weights: g.weights }
    }
}

impl TryFrom<RawGraph> for Graph {
    type Error = GraphError;

    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        if raw.edges.len() != raw.weights.len() {
            return Err(GraphError::Parse("edge/weight length mismatch".into()));
        }
        Graph::weighted(raw.n, &raw.edges, &raw.weights)
    }
}

impl Graph {
    /// Unit-weight graph.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let w = alloc::vec![1.0; edges.len()];
        Self::weighted(n, edges, &w)
    }

    pub fn weighted(n: usize, edges: &[(usize, usize)], weights: &[f64]) -> Result<Self, GraphError> {
        assert_eq!(edges.len(), weights.len(), "edge/weight length mismatch");
        let mut seen = BTreeSet::new();
        let mut es = Vec::with_capacity(edges.len());
        let mut ws = Vec::with_capacity(edges.len());
        for (&(a, b), &w) in edges.iter().zip(weights) {
            if a >= n {
                return Err(GraphError::NodeOutOfRange(a, n));
            }
            if b >= n {
                return Err(GraphError::NodeOutOfRange(b, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((i, j)) {
                return Err(GraphError::DuplicateEdge(i, j));
            }
            if !(w > 0.0) {
                return Err(GraphError::NonPositiveWeight(i, j));
            }
            es.push((i, j));
            ws.push(w);
        }
        Ok(Self { n, edges: es, weights: ws })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Neighbor lists, sorted per node.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = alloc::vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
        }
        adj
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            if a == i {
                out.push(b);
            } else if b == i {
                out.push(a);
            }
        }
        out.sort_unstable();
        out
    }

    /// Nodes within graph distance `k` of `i`, excluding `i` itself.
    pub fn k_hop_neighbors(&self, i: usize, k: usize) -> BTreeSet<usize> {
        assert!(i < self.n, "node out of range");
        let adj = self.adjacency();
        let mut frontier = BTreeSet::from([i]);
        let mut reached = BTreeSet::from([i]);
        for _ in 0..k {
            let mut next = BTreeSet::new();
            for &u in &frontier {
                for &v in &adj[u] {
                    if reached.insert(v) {
                        next.insert(v);
                    }
                }
            }
            frontier = next;
        }
        reached.remove(&i);
        reached
    }

    /// True iff the graph has a single connected component (by traversal).
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        self.component_count() == 1
    }

    pub fn component_count(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = alloc::vec![false; self.n];
        let mut components = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            components += 1;
            let mut stack = alloc::vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }

    /// Dense weighted Laplacian with cached spectral data.
    pub fn laplacian(&self) -> LaplacianMatrix {
        LaplacianMatrix::from_graph(self)
    }

    /// Edge-list text format: header `n m`, then one `i j w` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for (&(i, j), &w) in self.edges.iter().zip(&self.weights) {
            out.push_str(&format!("{} {} {}\n", i, j, w));
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| GraphError::Parse("empty input".into()))?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GraphError::Parse(format!("bad header: {header}")))?;
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| GraphError::Parse(format!("bad header: {header}")))?;
        let mut edges = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for line in lines {
            let mut f = line.split_whitespace();
            let i: usize = f
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| GraphError::Parse(format!("bad edge line: {line}")))?;
            let j: usize = f
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| GraphError::Parse(format!("bad edge line: {line}")))?;
            let w: f64 = match f.next() {
                Some(t) => t.parse().map_err(|_| GraphError::Parse(format!("bad weight: {line}")))?,
                None => 1.0,
            };
            edges.push((i, j));
            weights.push(w);
        }
        if edges.len() != m {
            return Err(GraphError::Parse(format!("expected {m} edges, found {}", edges.len())));
        }
        Self::weighted(n, &edges, &weights)
    }
}

/// Connected graph with exactly `m` edges: a random spanning tree (each node
/// attaches to a uniformly random earlier node of a random permutation),
/// then extra edges sampled uniformly without replacement.
pub fn random_connected_graph(n: usize, m: usize, seed: u64) -> Result<Graph, GraphError> {
    let max_edges = n * n.saturating_sub(1) / 2;
    if n == 0 || m + 1 < n || m > max_edges {
        return Err(GraphError::InfeasibleEdgeCount { n, m });
    }
    use rand::SeedableRng;
    let mut rng = crate::Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);

    let mut chosen = BTreeSet::new();
    for idx in 1..n {
        let parent = perm[rng.gen_range(0..idx)];
        let node = perm[idx];
        let e = if parent < node { (parent, node) } else { (node, parent) };
        chosen.insert(e);
    }
    let mut rest: Vec<(usize, usize)> = Vec::with_capacity(max_edges - chosen.len());
    for i in 0..n {
        for j in (i + 1)..n {
            if !chosen.contains(&(i, j)) {
                rest.push((i, j));
            }
        }
    }
    rest.shuffle(&mut rng);
    for &e in rest.iter().take(m - chosen.len()) {
        chosen.insert(e);
    }
    let edges: Vec<(usize, usize)> = chosen.into_iter().collect();
    Graph::new(n, &edges)
}

/// Dense symmetric graph Laplacian with cached eigendecomposition.
#[derive(Debug, Clone)]
pub struct LaplacianMatrix {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl LaplacianMatrix {
    pub fn from_graph(g: &Graph) -> Self {
        let n = g.n();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for (&(i, j), &w) in g.edges().iter().zip(g.weights()) {
            l[(i, j)] -= w;
            l[(j, i)] -= w;
            l[(i, i)] += w;
            l[(j, j)] += w;
        }
        Self::from_matrix(l)
    }

    /// Wraps an existing symmetric Laplacian (e.g. a rescaled one).
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let eig = matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..matrix.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut eigenvectors = DMatrix::<f64>::zeros(matrix.nrows(), matrix.ncols());
        for (col, &k) in order.iter().enumerate() {
            eigenvectors.set_column(col, &eig.eigenvectors.column(k));
        }
        Self { matrix, eigenvalues, eigenvectors }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigenvalues sorted ascending (μ₁ ≤ … ≤ μ_n).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector basis, columns ordered to match [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Algebraic connectivity λ₂.
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// Largest eigenvalue λ_n.
    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("empty Laplacian")
    }

    /// Scaled Laplacian βL (spectral data recomputed).
    pub fn scaled(&self, beta: f64) -> LaplacianMatrix {
        Self::from_matrix(&self.matrix * beta)
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    /// Moore-Penrose pseudoinverse applied to `v` via the eigenbasis
    /// (the zero modes are dropped).
    pub fn pinv_apply(&self, v: &DVector<f64>, tol: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.n());
        for k in 0..self.n() {
            let mu = self.eigenvalues[k];
            if mu.abs() > tol {
                let q = self.eigenvectors.column(k);
                out += q * (q.dot(v) / mu);
            }
        }
        out
    }
}

/// Spectral summary `(all eigenvalues ascending, λ₂, λ_n)`.
pub fn spectral_summary(l: &LaplacianMatrix) -> (Vec<f64>, f64, f64) {
    (self::math::symmetric_eigenvalues_sorted(l.matrix()), l.lambda2(), l.lambda_max())
}

/// The orthogonal coordinate change that isolates the Laplacian null space.
///
/// `T` is the explicit block matrix
/// `[[ (n−1+√n)I − (𝟙𝟙ᵀ − I), 𝟙/√n ], [ (−1−√n)𝟙ᵀ, 1/√n ]] · diag([ρ𝟙; 1])`
/// with `ρ = (n(n+1+2√n))^{−1/2}`; its last column is `𝟙/√n` and its first
/// `n−1` columns form an orthonormal basis of `𝟙⊥`, so
/// `T JᵀJ Tᵀ = I − 𝟙𝟙ᵀ/n` with `J = [I_{n−1} 0]`.
///
/// For a diagonal positive `H`, `M = J Tᵀ (LHL) T Jᵀ` then carries exactly
/// the `n−1` nonzero eigenvalues of `LHL`.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    t: DMatrix<f64>,
}

impl ProjectionMatrix {
    /// Builds `T` for `n ≥ 2` from the closed-form blocks.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "projection requires n >= 2");
        let nf = n as f64;
        let sqrt_n = nf.sqrt();
        let rho = 1.0 / (nf * (nf + 1.0 + 2.0 * sqrt_n)).sqrt();
        let mut t = DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let b = if i == j { nf - 1.0 + sqrt_n } else { -1.0 };
                t[(i, j)] = b * rho;
            }
        }
        for j in 0..n - 1 {
            t[(n - 1, j)] = (-1.0 - sqrt_n) * rho;
        }
        for i in 0..n {
            t[(i, n - 1)] = 1.0 / sqrt_n;
        }
        Self { t }
    }

    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    pub fn t(&self) -> &DMatrix<f64> {
        &self.t
    }

    /// The `n×(n−1)` block `T Jᵀ` (orthonormal basis of `𝟙⊥`).
    pub fn basis(&self) -> DMatrix<f64> {
        let n = self.n();
        self.t.columns(0, n - 1).into_owned()
    }

    /// `‖T JᵀJ Tᵀ − (I − 𝟙𝟙ᵀ/n)‖_F`, the defining-property residual.
    pub fn projector_residual(&self) -> f64 {
        let n = self.n();
        let b = self.basis();
        let p = &b * b.transpose();
        let ones = DMatrix::<f64>::from_element(n, n, 1.0 / n as f64);
        let target = DMatrix::<f64>::identity(n, n) - ones;
        (p - target).norm()
    }

    /// Reduced matrix `M = J Tᵀ A T Jᵀ` for a symmetric `A`.
    pub fn reduce(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let b = self.basis();
        b.transpose() * a * b
    }

    /// `M(x) = J Tᵀ L H L T Jᵀ` for diagonal Hessian entries `h`.
    pub fn reduced_hessian(&self, l: &LaplacianMatrix, h: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        assert_eq!(l.n(), n);
        assert_eq!(h.len(), n);
        let mut lhl = DMatrix::<f64>::zeros(n, n);
        // LHL with H = diag(h)
        let lm = l.matrix();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += lm[(i, k)] * h[k] * lm[(k, j)];
                }
                lhl[(i, j)] = acc;
            }
        }
        self.reduce(&lhl)
    }
}

/// Convenience alias matching the operation name used by callers.
pub fn projection_t(n: usize) -> ProjectionMatrix {
    ProjectionMatrix::new(n)
}
