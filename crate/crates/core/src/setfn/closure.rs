//! Concave closure `f⁺(x)` as a linear program with one column per subset:
//!
//! ```text
//! max Σ_S α_S f(S)   s.t.   Σ_S α_S = 1,   Σ_S α_S 1_S = x,   α ≥ 0
//! ```
//!
//! Solved with a dense revised simplex. The starting basis is the chain
//! `∅ ⊂ {σ1} ⊂ {σ1,σ2} ⊂ … ⊂ [n]` for coordinates sorted by decreasing `x`,
//! which is always primal feasible, so no phase one is needed.

use serde::{Deserialize, Serialize};

use super::{ExplicitSetFunction, MarginalVector, SubsetDistribution};
use crate::error::{ensure_capacity, Error, Result};
use crate::subset::Subset;

const CLOSURE_LIMIT: usize = 12;
const MAX_PIVOTS: usize = 200_000;
const REDUCED_COST_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcaveClosure {
    pub value: f64,
    /// An optimal distribution whose marginals equal `x`.
    pub witness: SubsetDistribution,
    /// Optimal dual `(λ_0, λ_1, …, λ_n)`: `λ_0 + Σ_{i∈S} λ_i ≥ f(S)` for all `S`
    /// and `λ_0 + λ·x = value`.
    pub dual: Vec<f64>,
}

pub fn concave_closure(f: &ExplicitSetFunction, x: &MarginalVector) -> Result<ConcaveClosure> {
    let n = f.n();
    ensure_capacity("concave closure", CLOSURE_LIMIT, n)?;
    if x.len() != n {
        return Err(Error::Domain("vector length does not match ground size".into()));
    }
    let scale = match f.max_value() {
        m if m > 0.0 => m,
        _ => 1.0,
    };
    let cost: Vec<f64> = f.values().iter().map(|v| v / scale).collect();
    let mut rhs = Vec::with_capacity(n + 1);
    rhs.push(1.0);
    rhs.extend_from_slice(x.as_slice());

    let mut basis = chain_basis(x.as_slice());
    let mut in_basis = vec![false; cost.len()];
    for &s in &basis {
        in_basis[s.index()] = true;
    }

    let m = n + 1;
    let mut bland = false;
    for _ in 0..MAX_PIVOTS {
        let binv =
            invert(&basis_matrix(&basis, m)).ok_or_else(|| Error::Numeric("simplex basis became singular".into()))?;
        let primal = mat_vec(&binv, &rhs);
        let dual: Vec<f64> = (0..m)
            .map(|k| (0..m).map(|j| cost[basis[j].index()] * binv[j][k]).sum())
            .collect();

        let entering = pick_entering(&cost, &dual, &in_basis, bland);
        let Some(entering) = entering else {
            return Ok(finish(f, &basis, &primal, &dual, scale, n));
        };

        let column = mat_vec(&binv, &column_of(entering, m));
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            if column[r] <= PIVOT_TOL {
                continue;
            }
            let theta = primal[r].max(0.0) / column[r];
            let better = match leave {
                None => true,
                Some((lr, lt)) => theta < lt - 1e-14 || (theta <= lt + 1e-14 && basis[r] < basis[lr]),
            };
            if better {
                leave = Some((r, theta));
            }
        }
        let (row, theta) = leave.ok_or_else(|| Error::Numeric("concave closure LP reported unbounded".into()))?;
        // Bland's rule through degenerate stretches rules out cycling.
        bland = theta <= 1e-14;
        in_basis[basis[row].index()] = false;
        in_basis[entering.index()] = true;
        basis[row] = entering;
    }
    Err(Error::Numeric(format!(
        "concave closure simplex did not converge in {MAX_PIVOTS} pivots"
    )))
}

fn chain_basis(x: &[f64]) -> Vec<Subset> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut chain = Vec::with_capacity(x.len() + 1);
    let mut cur = Subset::EMPTY;
    chain.push(cur);
    for i in order {
        cur = cur.with(i);
        chain.push(cur);
    }
    chain
}

fn column_of(s: Subset, m: usize) -> Vec<f64> {
    let mut col = vec![0.0; m];
    col[0] = 1.0;
    for i in s.iter() {
        col[i + 1] = 1.0;
    }
    col
}

fn basis_matrix(basis: &[Subset], m: usize) -> Vec<Vec<f64>> {
    let mut mat = vec![vec![0.0; m]; m];
    for (j, &s) in basis.iter().enumerate() {
        for (r, v) in column_of(s, m).into_iter().enumerate() {
            mat[r][j] = v;
        }
    }
    mat
}

fn pick_entering(cost: &[f64], dual: &[f64], in_basis: &[bool], bland: bool) -> Option<Subset> {
    // dual_sum[S] = λ_0 + Σ_{i∈S} λ_{i+1}
    let mut dual_sum = vec![0.0; cost.len()];
    dual_sum[0] = dual[0];
    let mut best: Option<(usize, f64)> = None;
    for s in 0..cost.len() {
        if s > 0 {
            let low = s.trailing_zeros() as usize;
            dual_sum[s] = dual_sum[s & (s - 1)] + dual[low + 1];
        }
        if in_basis[s] {
            continue;
        }
        let reduced = cost[s] - dual_sum[s];
        if reduced <= REDUCED_COST_TOL {
            continue;
        }
        if bland {
            return Some(Subset(s as u64));
        }
        if best.is_none_or(|(_, r)| reduced > r) {
            best = Some((s, reduced));
        }
    }
    best.map(|(s, _)| Subset(s as u64))
}

fn finish(
    f: &ExplicitSetFunction,
    basis: &[Subset],
    primal: &[f64],
    dual: &[f64],
    scale: f64,
    n: usize,
) -> ConcaveClosure {
    let mut atoms: Vec<(Subset, f64)> = basis
        .iter()
        .zip(primal)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&s, &w)| (s, w))
        .collect();
    atoms.sort_by_key(|&(s, _)| s);
    let value = atoms.iter().map(|&(s, w)| w * f.at(s)).sum();
    debug_assert_eq!(dual.len(), n + 1);
    ConcaveClosure {
        value,
        witness: SubsetDistribution { atoms },
        dual: dual.iter().map(|d| d * scale).collect(),
    }
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = a.len();
    let mut work: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..m {
        let pivot = (col..m).max_by(|&p, &q| work[p][col].abs().total_cmp(&work[q][col].abs()))?;
        if work[pivot][col].abs() < 1e-12 {
            return None;
        }
        work.swap(col, pivot);
        let p = work[col][col];
        for v in work[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = work[col].clone();
        for (r, row) in work.iter_mut().enumerate() {
            if r == col || row[col] == 0.0 {
                continue;
            }
            let factor = row[col];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
        }
    }
    Some(work.into_iter().map(|row| row[m..].to_vec()).collect())
}
