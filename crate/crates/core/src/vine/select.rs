//! Sequential (Dissmann) structure selection and fitting: each tree is the
//! maximum spanning tree of |dependence| among the admissible pairs, its
//! edges are fitted, and the h-transformed pseudo-observations feed the
//! next tree.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Edge, RVineModel, VineTree};
use crate::error::{Error, Result};
use crate::paircop::{fit_pair, Conditioning, Family, PairCopula, PairFitOptions, MIN_PAIR_OBSERVATIONS};
use crate::numerics::stats::{kendall_tau, spearman_rho};

/// Dependence measure used as the spanning-tree weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TreeWeight {
    #[default]
    Kendall,
    Spearman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineFitOptions {
    pub pair: PairFitOptions,
    /// Trees above this level get independence copulas without fitting.
    pub truncation: Option<usize>,
    pub weight: TreeWeight,
}

impl Default for VineFitOptions {
    fn default() -> Self {
        VineFitOptions {
            pair: PairFitOptions::default(),
            truncation: None,
            weight: TreeWeight::Kendall,
        }
    }
}

fn columns_of(u: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = u.len();
    if n < MIN_PAIR_OBSERVATIONS {
        return Err(Error::invalid(format!("vine fit needs at least {MIN_PAIR_OBSERVATIONS} rows, got {n}")));
    }
    let d = u[0].len();
    if d < 2 {
        return Err(Error::invalid("vine fit needs at least two columns"));
    }
    let mut cols = vec![Vec::with_capacity(n); d];
    for (t, row) in u.iter().enumerate() {
        if row.len() != d {
            return Err(Error::invalid(format!("row {t} has {} entries, expected {d}", row.len())));
        }
        for (j, &x) in row.iter().enumerate() {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::invalid(format!("u-data entry ({t}, {j}) = {x} is outside (0, 1)")));
            }
            cols[j].push(x);
        }
    }
    for (j, c) in cols.iter().enumerate() {
        if c.iter().all(|x| *x == c[0]) {
            return Err(Error::invalid(format!("column {} (index {j}) is constant", j + 1)));
        }
    }
    Ok(cols)
}

fn weight(kind: TreeWeight, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(match kind {
        TreeWeight::Kendall => kendall_tau(x, y)?.abs(),
        TreeWeight::Spearman => spearman_rho(x, y)?.abs(),
    })
}

/// Prim's maximum spanning tree over `n_nodes` nodes and candidate edges
/// `(i, j, w)` with `i < j`. Ties go to the lexicographically smallest
/// `(i, j)`.
pub(crate) fn prim_max(n_nodes: usize, candidates: &[(usize, usize, f64)]) -> Result<Vec<(usize, usize)>> {
    let mut in_tree = vec![false; n_nodes];
    in_tree[0] = true;
    let mut chosen = Vec::with_capacity(n_nodes.saturating_sub(1));
    for _ in 1..n_nodes {
        let mut best: Option<(usize, usize, f64)> = None;
        for &(i, j, w) in candidates {
            if in_tree[i] == in_tree[j] {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bj, bw)) => w > bw || (w == bw && (i, j) < (bi, bj)),
            };
            if better {
                best = Some((i, j, w));
            }
        }
        let (i, j, _) = best.ok_or_else(|| Error::numerical("candidate graph is disconnected"))?;
        in_tree[i] = true;
        in_tree[j] = true;
        chosen.push((i, j));
    }
    Ok(chosen)
}

/// Maximum spanning tree of a symmetric weight matrix, as used for the
/// first tree (Prim, lexicographic tie-break). Edges come back as sorted
/// `(i, j)` pairs with `i < j`.
pub fn max_spanning_tree(weights: &[Vec<f64>]) -> Result<Vec<(usize, usize)>> {
    let d = weights.len();
    if d < 2 || weights.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("weight matrix must be square with at least two nodes"));
    }
    let mut cands = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            cands.push((i, j, weights[i][j]));
        }
    }
    let mut t = prim_max(d, &cands)?;
    t.sort();
    Ok(t)
}

/// An edge candidate with its copula arguments.
struct Candidate {
    edge: Edge,
    x: Vec<f64>,
    y: Vec<f64>,
}

/// Fits a vine by sequential maximum-spanning-tree selection.
pub fn fit(u: &[Vec<f64>], opts: &VineFitOptions) -> Result<RVineModel> {
    let cols = columns_of(u)?;
    let (n, d) = (u.len(), cols.len());
    let mut trees: Vec<VineTree> = Vec::with_capacity(d - 1);
    // h-outputs (a side, b side) of the previous tree's edges.
    let mut prev_out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();

    for level in 1..d {
        let n_nodes = d - level + 1;
        let mut cands: Vec<Candidate> = Vec::new();
        if level == 1 {
            for i in 0..d {
                for j in i + 1..d {
                    cands.push(Candidate {
                        edge: Edge {
                            a: i,
                            b: j,
                            conditioning: Vec::new(),
                            left: i,
                            right: j,
                            copula: PairCopula::independence(),
                            loglik: 0.0,
                        },
                        x: cols[i].clone(),
                        y: cols[j].clone(),
                    });
                }
            }
        } else {
            let prev = &trees[level - 2].edges;
            for p in 0..prev.len() {
                for q in p + 1..prev.len() {
                    let (ep, eq) = (&prev[p], &prev[q]);
                    let shares = [ep.left, ep.right].iter().any(|x| *x == eq.left || *x == eq.right);
                    if !shares {
                        continue;
                    }
                    let (sp, sq) = (ep.constraint_set(), eq.constraint_set());
                    let dset: BTreeSet<usize> = sp.intersection(&sq).copied().collect();
                    let a: Vec<usize> = sp.difference(&dset).copied().collect();
                    let b: Vec<usize> = sq.difference(&dset).copied().collect();
                    if a.len() != 1 || b.len() != 1 || dset.len() != level - 1 {
                        return Err(Error::numerical(format!(
                            "tree {level}: edges {} and {} do not form a valid pair",
                            ep.label(),
                            eq.label()
                        )));
                    }
                    let (a, b) = (a[0], b[0]);
                    let x = if ep.a == a { prev_out[p].0.clone() } else { prev_out[p].1.clone() };
                    let y = if eq.a == b { prev_out[q].0.clone() } else { prev_out[q].1.clone() };
                    cands.push(Candidate {
                        edge: Edge {
                            a,
                            b,
                            conditioning: dset.into_iter().collect(),
                            left: p,
                            right: q,
                            copula: PairCopula::independence(),
                            loglik: 0.0,
                        },
                        x,
                        y,
                    });
                }
            }
        }

        let weights: Vec<f64> = cands
            .par_iter()
            .map(|c| weight(opts.weight, &c.x, &c.y))
            .collect::<Result<Vec<f64>>>()?;
        let graph: Vec<(usize, usize, f64)> = cands
            .iter()
            .zip(&weights)
            .map(|(c, &w)| (c.edge.left, c.edge.right, w))
            .collect();
        let mut picked = prim_max(n_nodes, &graph)?;
        picked.sort();
        let mut chosen: Vec<Candidate> = Vec::with_capacity(picked.len());
        for (l, r) in picked {
            let pos = cands
                .iter()
                .position(|c| c.edge.left == l && c.edge.right == r)
                .expect("picked edge is a candidate");
            chosen.push(cands.swap_remove(pos));
        }

        let truncated = opts.truncation.is_some_and(|t| level > t);
        let fits: Vec<Result<(PairCopula, f64)>> = chosen
            .par_iter()
            .map(|c| {
                if truncated {
                    return Ok((PairCopula::independence(), 0.0));
                }
                let f = fit_pair(&c.x, &c.y, &opts.pair)
                    .map_err(|e| e.at_stage(&format!("tree {level} edge {}", c.edge.label())))?;
                Ok((f.copula, f.loglik))
            })
            .collect();

        let mut edges = Vec::with_capacity(chosen.len());
        let mut outs = Vec::with_capacity(chosen.len());
        for (mut c, fit) in chosen.into_iter().zip(fits) {
            let (copula, ll) = fit?;
            if level + 1 < d {
                let oa: Vec<f64> = c.x.iter().zip(&c.y).map(|(&x, &y)| copula.hfunc(x, y, Conditioning::Second)).collect();
                let ob: Vec<f64> = c.x.iter().zip(&c.y).map(|(&x, &y)| copula.hfunc(x, y, Conditioning::First)).collect();
                outs.push((oa, ob));
            }
            c.edge.copula = copula;
            c.edge.loglik = ll;
            edges.push(c.edge);
        }
        log::debug!("tree {level}: {}", edges.iter().map(|e| format!("{}:{}", e.label(), e.copula)).collect::<Vec<_>>().join(" "));
        trees.push(VineTree { level, edges });
        prev_out = outs;
    }
    let columns = (1..=d).map(|i| format!("V{i}")).collect();
    RVineModel::from_trees(d, columns, trees, n)
}

/// Structure only: the trees chosen by [`fit`].
pub fn select_structure(u: &[Vec<f64>], opts: &VineFitOptions) -> Result<Vec<VineTree>> {
    Ok(fit(u, opts)?.trees)
}

/// The Gaussian-vine baseline: same selection with only Gaussian pairs.
pub fn gaussian_vine(u: &[Vec<f64>]) -> Result<RVineModel> {
    let opts = VineFitOptions {
        pair: PairFitOptions {
            families: vec![Family::Gaussian],
            independence_test: false,
            ..PairFitOptions::default()
        },
        ..VineFitOptions::default()
    };
    fit(u, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prim_tie_break_builds_a_star() {
        let mut c = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                c.push((i, j, 0.3));
            }
        }
        assert_eq!(prim_max(5, &c).unwrap(), vec![(0, 1), (0, 2), (0, 3), (0, 4)]);
    }

    #[test]
    fn prim_three_nodes() {
        let c = [(0, 1, 0.6), (0, 2, 0.1), (1, 2, 0.5)];
        let mut t = prim_max(3, &c).unwrap();
        t.sort();
        assert_eq!(t, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn constant_column_is_named() {
        let u: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 + 0.5) / 40.0, 0.5]).collect();
        let err = fit(&u, &VineFitOptions::default()).unwrap_err().to_string();
        assert!(err.contains("column 2"), "{err}");
    }
}
