//! Communication graphs and doubly stochastic mixing matrices.
//!
//! The spectral gap `rho = 1 - ||U^T W U||_2` (largest singular value of the
//! mixing matrix restricted to the subspace orthogonal to the all-ones
//! vector) governs how fast gossip averaging contracts disagreement. All
//! matrices here are dense f64; the experiments never exceed a few hundred
//! agents, so exactness wins over scalability.

use crate::error::Error;
use crate::Result;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Absolute tolerance on row/column sums of a doubly stochastic matrix.
pub const STOCHASTIC_TOL: f64 = 1e-10;

/// Retry budget for connected Erdos-Renyi generation.
pub const ER_RETRY_BUDGET: usize = 100;

/// An undirected, connected communication graph. Self-loops are implied for
/// every node and not stored.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Build a graph from an undirected edge list. Edges are stored with
    /// `i < j`; duplicates collapse. Fails if an endpoint is out of range,
    /// an edge is a self-loop, or the graph is disconnected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidTopology(format!("explicit self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::InvalidTopology(format!(
                    "edge ({i},{j}) out of range for n={n}"
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let g = Self { n, edges: set };
        if !g.is_connected() {
            return Err(Error::InvalidTopology("graph is disconnected".into()));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Degree counting graph neighbors only (self-loop excluded).
    pub fn degree(&self, i: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == i || b == i)
            .count()
    }

    fn is_connected(&self) -> bool {
        if self.n == 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }
}

/// Doubly stochastic gossip weights with the spectral gap cached.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    w: DMatrix<f64>,
    rho: f64,
}

impl MixingMatrix {
    /// Wrap a candidate weight matrix, verifying double stochasticity and
    /// computing the spectral gap.
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        check_doubly_stochastic(&w)?;
        let rho = spectral_gap(&w)?;
        Ok(Self { w, rho })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// One gossip round: `W * X` for an n×d parameter stack.
    pub fn mix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.w * x
    }

    /// Plain-text serialization: first line `n`, then n whitespace-separated
    /// rows with 17 significant digits. Round-trips bit-faithfully.
    pub fn to_text(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        let _ = writeln!(out, "{n}");
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", self.w[(i, j)])).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mixing-matrix text".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad dimension line: {e}")))?;
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing row {i}")))?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != n {
                return Err(Error::Parse(format!(
                    "row {i} has {} entries, expected {n}",
                    vals.len()
                )));
            }
            for (j, v) in vals.iter().enumerate() {
                w[(i, j)] = v
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {i} col {j}: {e}")))?;
            }
        }
        Self::new(w)
    }
}

/// Verify nonnegativity and that every row and column sums to 1 within
/// [`STOCHASTIC_TOL`], naming the offending row/column otherwise.
pub fn check_doubly_stochastic(w: &DMatrix<f64>) -> Result<()> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::Contract(format!(
            "weight matrix must be square, got {}x{}",
            n,
            w.ncols()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            if w[(i, j)] < 0.0 {
                return Err(Error::Contract(format!(
                    "negative weight at ({i},{j}): {}",
                    w[(i, j)]
                )));
            }
        }
    }
    for i in 0..n {
        let rs: f64 = (0..n).map(|j| w[(i, j)]).sum();
        if (rs - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Contract(format!("row {i} sums to {rs}, expected 1")));
        }
    }
    for j in 0..n {
        let cs: f64 = (0..n).map(|i| w[(i, j)]).sum();
        if (cs - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Contract(format!(
                "column {j} sums to {cs}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Orthonormal basis of the subspace orthogonal to the all-ones vector,
/// built from the Householder reflection mapping `1/sqrt(n)` to `e_1`.
/// Returns an n×(n-1) matrix.
fn ones_complement_basis(n: usize) -> DMatrix<f64> {
    let q = 1.0 / (n as f64).sqrt();
    // v = q*1 - e_1, H = I - 2 v v^T / (v^T v); columns 2..n of H span 1^perp.
    let mut v = DMatrix::from_element(n, 1, q);
    v[(0, 0)] -= 1.0;
    let vtv = v.dot(&v);
    let mut h = DMatrix::identity(n, n);
    if vtv > 0.0 {
        h -= (&v * v.transpose()) * (2.0 / vtv);
    }
    h.columns(1, n - 1).into_owned()
}

/// Spectral gap `1 - ||U^T W U||_2` of a doubly stochastic matrix.
pub fn spectral_gap(w: &DMatrix<f64>) -> Result<f64> {
    check_doubly_stochastic(w)?;
    let n = w.nrows();
    if n == 1 {
        return Ok(1.0);
    }
    let u = ones_complement_basis(n);
    let m = u.transpose() * w * &u;
    let s = m
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    Ok(1.0 - s)
}

fn ring_graph(n: usize) -> Graph {
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::new(n, edges).expect("ring is connected")
}

/// Ring with self-weight `s` and `(1-s)/2` on each ring neighbor.
pub fn build_ring(n: usize, self_weight: f64) -> Result<MixingMatrix> {
    if n < 3 {
        return Err(Error::InvalidTopology(format!("ring needs n >= 3, got {n}")));
    }
    if !(0.0..1.0).contains(&self_weight) || self_weight <= 0.0 {
        return Err(Error::InvalidTopology(format!(
            "self weight must lie in (0,1), got {self_weight}"
        )));
    }
    let side = (1.0 - self_weight) / 2.0;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = self_weight;
        w[(i, (i + 1) % n)] += side;
        w[(i, (i + n - 1) % n)] += side;
    }
    MixingMatrix::new(w)
}

/// Metropolis-Hastings weights for a connected graph:
/// `W_ij = 1/(1 + max(deg_i, deg_j))` on edges, diagonal takes the rest.
pub fn mh_weights(g: &Graph) -> Result<MixingMatrix> {
    let n = g.n();
    let deg: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let mut w = DMatrix::zeros(n, n);
    for (i, j) in g.edges() {
        let wij = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        w[(i, j)] = wij;
        w[(j, i)] = wij;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::new(w)
}

/// Erdos-Renyi graph with Metropolis-Hastings weights, off-diagonal halved so
/// the self-weight floor sits near 0.5. Resamples until connected, up to
/// [`ER_RETRY_BUDGET`] attempts.
pub fn build_erdos_renyi(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Result<MixingMatrix> {
    build_erdos_renyi_with_budget(n, p, rng, ER_RETRY_BUDGET)
}

pub fn build_erdos_renyi_with_budget(
    n: usize,
    p: f64,
    rng: &mut ChaCha8Rng,
    budget: usize,
) -> Result<MixingMatrix> {
    if !(0.0..=1.0).contains(&p) || p <= 0.0 {
        return Err(Error::InvalidTopology(format!(
            "edge probability must lie in (0,1], got {p}"
        )));
    }
    for _ in 0..budget {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if let Ok(g) = Graph::new(n, edges) {
            let mh = mh_weights(&g)?;
            let mut w = mh.matrix() * 0.5;
            for i in 0..n {
                let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
                w[(i, i)] = 1.0 - off;
            }
            return MixingMatrix::new(w);
        }
    }
    Err(Error::TopologyGeneration {
        attempts: budget,
        reason: format!("no connected Erdos-Renyi draw at n={n}, p={p}"),
    })
}

/// Complete-averaging matrix `(1/n) 11^T`; spectral gap 1.
pub fn complete_averaging(n: usize) -> MixingMatrix {
    MixingMatrix::new(DMatrix::from_element(n, n, 1.0 / n as f64))
        .expect("uniform matrix is doubly stochastic")
}

/// Ring graph accessor, used by tests and the TD experiment setup.
pub fn ring(n: usize) -> Graph {
    ring_graph(n)
}
