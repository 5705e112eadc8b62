//! Diagonal symmetries of a sparsity pattern.
//!
//! If `D T D* = λ T` for a diagonal unitary `D` and unimodular `λ`, the metric
//! LMIs are invariant under `P ↦ D P D*`, so an optimal `P` may be averaged over
//! the group and vanishes between coordinates with different phases.

use std::collections::HashMap;

use crate::numkit::Operator;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Class label per coordinate; `P[a][b]` may be nonzero only within a class.
///
/// With `twisted`, phases `λ ≠ 1` are allowed (valid for the power-bounded
/// problem, not for generators).
pub(crate) fn symmetry_classes(t: &Operator, twisted: bool) -> Vec<usize> {
    let n = t.nrows();
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if t[(a, b)].norm() != 0.0 {
                edges.push((a, b));
                adj[a].push((b, -1));
                adj[b].push((a, 1));
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut label = vec![0i64; n];
    let mut ncomp = 0;
    for root in 0..n {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = ncomp;
        let mut stack = vec![root];
        while let Some(a) = stack.pop() {
            for &(b, step) in &adj[a] {
                if comp[b] == usize::MAX {
                    comp[b] = ncomp;
                    label[b] = label[a] + step;
                    stack.push(b);
                }
            }
        }
        ncomp += 1;
    }
    if !twisted {
        return comp;
    }
    let q = edges
        .iter()
        .fold(0i64, |g, &(a, b)| gcd(g, label[a] - label[b] - 1));
    let mut ids: HashMap<(usize, i64), usize> = HashMap::new();
    (0..n)
        .map(|a| {
            let key = (
                comp[a],
                if q == 0 {
                    label[a]
                } else {
                    label[a].rem_euclid(q)
                },
            );
            let next = ids.len();
            *ids.entry(key).or_insert(next)
        })
        .collect()
}

pub(crate) fn is_real(t: &Operator) -> bool {
    t.iter().all(|z| z.im == 0.0)
}
