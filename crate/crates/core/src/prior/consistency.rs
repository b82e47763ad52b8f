use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySubgraph {
    /// Pool rows kept, ascending.
    pub kept: Vec<usize>,
    /// Classification labels of the kept rows.
    pub p_sub: Vec<usize>,
    pub pool_size: usize,
}

impl ConsistencySubgraph {
    pub fn kept_fraction(&self) -> f64 {
        if self.pool_size == 0 {
            0.0
        } else {
            self.kept.len() as f64 / self.pool_size as f64
        }
    }
}

/// Keeps every node that shares both its cluster and its predicted class with
/// at least one other node, i.e. every endpoint of an edge present in both the
/// clustering graph and the classification graph.
pub fn consistency_subgraph(p_clu: &[usize], p_cls: &[usize]) -> Result<ConsistencySubgraph> {
    if p_clu.len() != p_cls.len() {
        return Err(Error::LengthMismatch {
            left: p_clu.len(),
            right: p_cls.len(),
        });
    }
    let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
    for (&a, &b) in p_clu.iter().zip(p_cls) {
        *pairs.entry((a, b)).or_insert(0) += 1;
    }
    let kept: Vec<usize> = (0..p_clu.len()).filter(|&i| pairs[&(p_clu[i], p_cls[i])] >= 2).collect();
    let p_sub = kept.iter().map(|&i| p_cls[i]).collect();
    Ok(ConsistencySubgraph {
        kept,
        p_sub,
        pool_size: p_clu.len(),
    })
}
