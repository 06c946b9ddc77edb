//! Immutable attributed graph store.
//!
//! Adjacency is CSR with every undirected edge stored once per direction.
//! Self-loops are never stored; encoders add their own.

mod io;
mod split;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, SparseMatrix};

pub use io::{
    edges_tsv, load_dataset, load_dir, load_split, nodes_tsv, write_dataset, write_split,
    EDGES_FILE, NODES_FILE, SPLIT_FILE,
};
pub use split::{stratified_split, Split, DEFAULT_SPLIT_RATIOS};

/// Undirected edge `(u, v, weight)`.
pub type Edge = (usize, usize, f64);

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    features: DenseMatrix,
    sensitive: Vec<u8>,
    labels: Vec<u8>,
    label_mask: Vec<bool>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Reverse edges are added,
    /// duplicates merged and self-loops dropped. Listing both directions of
    /// an edge with different weights is an error.
    pub fn new(
        features: DenseMatrix,
        sensitive: Vec<u8>,
        labels: Vec<Option<u8>>,
        edges: &[Edge],
    ) -> Result<Self> {
        let n = features.rows();
        if sensitive.len() != n || labels.len() != n {
            return Err(Error::Validation(format!(
                "{n} feature rows but {} sensitive values and {} labels",
                sensitive.len(),
                labels.len()
            )));
        }
        let mut canonical: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut self_loops = 0usize;
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) references a node >= {n}"
                )));
            }
            if u == v {
                self_loops += 1;
                continue;
            }
            let key = (u.min(v), u.max(v));
            match canonical.get(&key) {
                Some(&prev) if prev != w => {
                    return Err(Error::Validation(format!(
                        "edge ({}, {}) listed with weights {prev} and {w}",
                        key.0, key.1
                    )));
                }
                _ => {
                    canonical.insert(key, w);
                }
            }
        }
        if self_loops > 0 {
            log::warn!("dropped {self_loops} self-loop(s)");
        }
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(u, v), &w) in &canonical {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(2 * canonical.len());
        let mut weights = Vec::with_capacity(2 * canonical.len());
        offsets.push(0);
        for list in &mut adj {
            list.sort_by_key(|&(t, _)| t);
            for &(t, w) in list.iter() {
                targets.push(t);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        let label_mask = labels.iter().map(Option::is_some).collect();
        let labels = labels.into_iter().map(|l| l.unwrap_or(0)).collect();
        let g = Self {
            offsets,
            targets,
            weights,
            features,
            sensitive,
            labels,
            label_mask,
        };
        g.validate()?;
        Ok(g)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.offsets.len() != n + 1 || self.offsets[0] != 0 {
            return Err(Error::Validation(
                "CSR offsets must have length n+1 and start at 0".into(),
            ));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Validation(
                "CSR offsets must be nondecreasing".into(),
            ));
        }
        if self.offsets[n] != self.targets.len() || self.targets.len() != self.weights.len() {
            return Err(Error::Validation("CSR arrays disagree in length".into()));
        }
        if self.sensitive.len() != n || self.labels.len() != n || self.label_mask.len() != n {
            return Err(Error::Validation(
                "per-node arrays must have n entries".into(),
            ));
        }
        if let Some(i) = self.sensitive.iter().position(|&s| s > 1) {
            return Err(Error::Validation(format!(
                "node {i}: sensitive value must be 0 or 1"
            )));
        }
        if let Some(i) = self.labels.iter().position(|&s| s > 1) {
            return Err(Error::Validation(format!("node {i}: label must be 0 or 1")));
        }
        if !self.features.is_finite() {
            return Err(Error::Validation("features must be finite".into()));
        }
        for i in 0..n {
            let (nbrs, ws) = self.neighbors(i);
            for (&j, &w) in nbrs.iter().zip(ws) {
                if j >= n {
                    return Err(Error::Validation(format!(
                        "node {i}: neighbor {j} out of range"
                    )));
                }
                if j == i {
                    return Err(Error::Validation(format!("node {i}: stored self-loop")));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::Validation(format!(
                        "edge ({i}, {j}): weight {w} must be positive"
                    )));
                }
                match self.edge_weight(j, i) {
                    Some(back) if back == w => {}
                    Some(back) => {
                        return Err(Error::Validation(format!(
                            "asymmetric weights on ({i}, {j}): {w} vs {back}"
                        )))
                    }
                    None => {
                        return Err(Error::Validation(format!("edge ({i}, {j}) has no reverse")))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Number of stored directed entries (twice the undirected edge count).
    pub fn n_directed_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_mask(&self) -> &[bool] {
        &self.label_mask
    }

    pub fn label(&self, i: usize) -> Option<u8> {
        self.label_mask[i].then(|| self.labels[i])
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn neighbors(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.targets[a..b], &self.weights[a..b])
    }

    pub fn edge_weight(&self, i: usize, j: usize) -> Option<f64> {
        let (nbrs, ws) = self.neighbors(i);
        nbrs.binary_search(&j).ok().map(|k| ws[k])
    }

    /// Each undirected edge once, as `(u, v, w)` with `u < v`.
    pub fn undirected_edges(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.targets.len() / 2);
        for u in 0..self.n_nodes() {
            let (nbrs, ws) = self.neighbors(u);
            for (&v, &w) in nbrs.iter().zip(ws) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    /// Weighted adjacency as a sparse matrix (no self-loops).
    pub fn adjacency(&self) -> SparseMatrix {
        SparseMatrix::new(
            self.n_nodes(),
            self.n_nodes(),
            self.offsets.clone(),
            self.targets.clone(),
            self.weights.clone(),
        )
        .expect("graph CSR is valid")
    }

    /// Same topology with new per-entry weights (aligned with `targets`).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.weights.len() {
            return Err(Error::shape(
                "with_weights",
                self.weights.len(),
                weights.len(),
            ));
        }
        let g = Self {
            weights,
            ..self.clone()
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        if features.rows() != self.n_nodes() {
            return Err(Error::shape(
                "with_features",
                self.n_nodes(),
                features.rows(),
            ));
        }
        let g = Self {
            features,
            ..self.clone()
        };
        g.validate()?;
        Ok(g)
    }

    /// Relabels nodes: old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
        let mut feats = DenseMatrix::zeros(n, self.n_features());
        let mut sens = vec![0; n];
        let mut labels = vec![None; n];
        for i in 0..n {
            feats.row_mut(perm[i]).copy_from_slice(self.features.row(i));
            sens[perm[i]] = self.sensitive[i];
            labels[perm[i]] = self.label(i);
        }
        let edges: Vec<Edge> = self
            .undirected_edges()
            .into_iter()
            .map(|(u, v, w)| (perm[u], perm[v], w))
            .collect();
        Self::new(feats, sens, labels, &edges)
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&i| self.label_mask[i])
            .collect()
    }

    /// Count of nodes per sensitive group.
    pub fn group_sizes(&self) -> [usize; 2] {
        let ones = self.sensitive.iter().filter(|&&s| s == 1).count();
        [self.n_nodes() - ones, ones]
    }
}

/// Degree and heterogeneous-degree summary.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborStats {
    pub degree: Vec<usize>,
    /// Neighbors with a different sensitive value.
    pub hetero_degree: Vec<usize>,
    pub avg_degree: f64,
    pub avg_hetero_degree: f64,
    /// Nodes without any heterogeneous neighbor.
    pub n_no_hetero: usize,
}

pub fn neighbor_stats(g: &Graph) -> NeighborStats {
    let n = g.n_nodes();
    let s = g.sensitive();
    let degree: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let hetero_degree: Vec<usize> = (0..n)
        .map(|i| g.neighbors(i).0.iter().filter(|&&j| s[j] != s[i]).count())
        .collect();
    let denom = n.max(1) as f64;
    NeighborStats {
        avg_degree: degree.iter().sum::<usize>() as f64 / denom,
        avg_hetero_degree: hetero_degree.iter().sum::<usize>() as f64 / denom,
        n_no_hetero: hetero_degree.iter().filter(|&&h| h == 0).count(),
        degree,
        hetero_degree,
    }
}
