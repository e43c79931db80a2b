//! Exact evaluators for the composition maxima that describe disjoint unions
//! and degeneration limits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-component normalized eigenvalue tables `V_i[k]` with `V_i[0] = 0`,
/// plus the number of round discs split off in the limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionTable {
    pub component_tables: Vec<Vec<f64>>,
    pub disc_count: usize,
}

impl CompositionTable {
    pub fn new(component_tables: Vec<Vec<f64>>, disc_count: usize) -> Result<Self> {
        for (i, t) in component_tables.iter().enumerate() {
            if t.is_empty() || t[0] != 0.0 {
                return Err(Error::param(format!("table {i} must start with V[0] = 0")));
            }
            if t.iter().any(|v| !v.is_finite()) || t.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::param(format!("table {i} must be finite and non-decreasing")));
            }
        }
        Ok(Self { component_tables, disc_count })
    }

    pub fn components(&self) -> usize {
        self.component_tables.len()
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::param("composition index k must be at least 1"));
    }
    Ok(())
}

/// `best[j]` = max of `sum V_i[k_i]` over the components, `sum k_i = j`,
/// with every `k_i` in `min_part..len_i`.
fn knapsack(tables: &[Vec<f64>], k: usize, min_part: usize) -> Vec<f64> {
    let mut best = vec![f64::NEG_INFINITY; k + 1];
    best[0] = 0.0;
    for t in tables {
        let mut next = vec![f64::NEG_INFINITY; k + 1];
        for (j, &b) in best.iter().enumerate() {
            if b == f64::NEG_INFINITY {
                continue;
            }
            for (part, &v) in t.iter().enumerate().skip(min_part) {
                if j + part > k {
                    break;
                }
                let cand = b + v;
                if cand > next[j + part] {
                    next[j + part] = cand;
                }
            }
        }
        best = next;
    }
    best
}

/// Maximum of `sum V_i[k_i]` over compositions of `k` into strictly positive
/// parts, one per component. No component can be left out: each keeps its
/// constant eigenfunction however little boundary mass it carries, so `k`
/// must be at least the number of components.
pub fn combine_disjoint(tables: &CompositionTable, k: usize) -> Result<f64> {
    check_k(k)?;
    if tables.components() == 0 {
        return Err(Error::param("at least one component table required"));
    }
    let best = knapsack(&tables.component_tables, k, 1)[k];
    if best == f64::NEG_INFINITY {
        return Err(Error::CompositionOutOfRange { k });
    }
    Ok(best)
}

/// Maximum of `sum V_i[k_i] + 2 pi r` over `k_i >= 0` and disc indices with
/// total `k`. Disc values are linear, so any positive disc count behaves as
/// a single disc absorbing all remaining indices.
pub fn degeneration_limit(tables: &CompositionTable, k: usize) -> Result<f64> {
    check_k(k)?;
    if tables.components() == 0 && tables.disc_count == 0 {
        return Err(Error::param("limit space has neither components nor discs"));
    }
    let best = knapsack(&tables.component_tables, k, 0);
    let value = if tables.disc_count > 0 {
        best.iter()
            .enumerate()
            .filter(|(_, b)| b.is_finite())
            .map(|(j, b)| b + 2.0 * PI * (k - j) as f64)
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        best[k]
    };
    if value == f64::NEG_INFINITY {
        return Err(Error::CompositionOutOfRange { k });
    }
    Ok(value)
}

/// Exhaustive enumeration of every assignment `k_i` (and disc index count)
/// behind [`combine_disjoint`] and [`degeneration_limit`]. Exponential in
/// the number of components; meant for cross-checks only.
pub fn brute_force(tables: &CompositionTable, k: usize, disjoint: bool) -> Result<f64> {
    check_k(k)?;
    let c = tables.components();
    let mut parts = vec![0usize; c];
    let mut best = f64::NEG_INFINITY;
    loop {
        let used: usize = parts.iter().sum();
        if used <= k {
            let fits = parts.iter().zip(&tables.component_tables).all(|(&p, t)| p < t.len());
            if fits {
                let sum: f64 = parts.iter().zip(&tables.component_tables).map(|(&p, t)| t[p]).sum();
                let rest = k - used;
                let value = if disjoint {
                    (rest == 0 && parts.iter().all(|&p| p > 0)).then_some(sum)
                } else if tables.disc_count > 0 {
                    Some(sum + 2.0 * PI * rest as f64)
                } else {
                    (rest == 0).then_some(sum)
                };
                if let Some(v) = value {
                    best = best.max(v);
                }
            }
        }
        // odometer over 0..=k per component
        let mut i = 0;
        while i < c {
            parts[i] += 1;
            if parts[i] <= k {
                break;
            }
            parts[i] = 0;
            i += 1;
        }
        if i == c {
            break;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::CompositionOutOfRange { k });
    }
    Ok(best)
}
