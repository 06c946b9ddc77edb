use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

pub const DEFAULT_SPLIT_RATIOS: (f64, f64, f64) = (0.5, 0.25, 0.25);

/// Disjoint train / validation / test node sets over labeled nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl Split {
    pub fn validate(&self, g: &Graph) -> Result<()> {
        let mut owner = vec![0u8; g.n_nodes()];
        for (tag, part) in [(1u8, &self.train), (2, &self.val), (3, &self.test)] {
            if part.is_empty() {
                return Err(Error::Degenerate("split part is empty".into()));
            }
            for &i in part {
                if i >= g.n_nodes() || !g.label_mask()[i] {
                    return Err(Error::Validation(format!(
                        "split node {i} is not a labeled node"
                    )));
                }
                if owner[i] != 0 {
                    return Err(Error::Validation(format!(
                        "split node {i} appears in two parts"
                    )));
                }
                owner[i] = tag;
            }
        }
        Ok(())
    }
}

/// Largest-remainder rounding of `quotas` to integers summing to `total`.
/// Ties go to the lower index.
fn apportion(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        out[k] += 1;
    }
    out
}

/// Label-stratified random split of the labeled nodes.
pub fn stratified_split(g: &Graph, ratios: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (a, b, c) = ratios;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for i in g.labeled_nodes() {
        by_class[g.labels()[i] as usize].push(i);
    }
    let mut r = rng::stream(seed, "split", 0);
    for list in &mut by_class {
        list.shuffle(&mut r);
    }
    let n = by_class[0].len() + by_class[1].len();
    let n_train = (n as f64 * a).round() as usize;
    let n_val = (n as f64 * b).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::Degenerate(format!(
            "{n} labeled nodes cannot populate a {ratios:?} split"
        )));
    }
    let quotas = |cum: usize| -> Vec<f64> {
        by_class
            .iter()
            .map(|l| l.len() as f64 * cum as f64 / n as f64)
            .collect()
    };
    let cut1 = apportion(&quotas(n_train), n_train);
    let cut2 = apportion(&quotas(n_train + n_val), n_train + n_val);

    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (k, list) in by_class.iter().enumerate() {
        let c1 = cut1[k];
        let c2 = cut2[k].max(c1);
        split.train.extend_from_slice(&list[..c1]);
        split.val.extend_from_slice(&list[c1..c2]);
        split.test.extend_from_slice(&list[c2..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    split.validate(g)?;
    Ok(split)
}
