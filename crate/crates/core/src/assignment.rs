//! Ranked assignment: the K cheapest row-to-column assignments of a cost
//! matrix, via Murty's partitioning over a shortest-augmenting-path
//! Hungarian solver. Infinite entries mark forbidden pairs.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

/// Problems with at most this many (row, measurement column) pairs are solved
/// by exhaustive enumeration instead of Murty's algorithm.
pub const ENUMERATION_LIMIT: usize = 16;

/// One complete assignment: `columns[i]` is the column taken by row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub columns: Vec<usize>,
    pub cost: f64,
}

fn total_cost(cost: &DMatrix<f64>, columns: &[usize]) -> f64 {
    columns.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum()
}

/// Minimum-cost assignment of every row to a distinct column. Requires
/// `rows <= cols`. Returns `None` when no assignment avoids infinite entries.
pub fn solve(cost: &DMatrix<f64>) -> Option<Assignment> {
    let (n, m) = cost.shape();
    assert!(n <= m, "assignment needs at least as many columns as rows");
    if n == 0 {
        return Some(Assignment {
            columns: Vec::new(),
            cost: 0.0,
        });
    }
    let inf = f64::INFINITY;
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let c = cost[(i0 - 1, j - 1)];
                let reduced = if c == inf { inf } else { c - u[i0] - v[j] };
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if delta == inf {
                return None;
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut columns = vec![0usize; n];
    for j in 1..=m {
        if owner[j] > 0 {
            columns[owner[j] - 1] = j - 1;
        }
    }
    let cost_sum = total_cost(cost, &columns);
    Some(Assignment {
        columns,
        cost: cost_sum,
    })
}

/// All finite-cost assignments, cheapest first; ties ordered by columns.
pub fn enumerate(cost: &DMatrix<f64>) -> Vec<Assignment> {
    let (n, m) = cost.shape();
    let mut out = Vec::new();
    let mut taken = vec![false; m];
    let mut current = Vec::with_capacity(n);
    fn recurse(
        cost: &DMatrix<f64>,
        row: usize,
        partial: f64,
        taken: &mut [bool],
        current: &mut Vec<usize>,
        out: &mut Vec<Assignment>,
    ) {
        if row == cost.nrows() {
            out.push(Assignment {
                columns: current.clone(),
                cost: partial,
            });
            return;
        }
        for j in 0..cost.ncols() {
            let c = cost[(row, j)];
            if taken[j] || c == f64::INFINITY {
                continue;
            }
            taken[j] = true;
            current.push(j);
            recurse(cost, row + 1, partial + c, taken, current, out);
            current.pop();
            taken[j] = false;
        }
    }
    recurse(cost, 0, 0.0, &mut taken, &mut current, &mut out);
    for a in &mut out {
        a.cost = total_cost(cost, &a.columns);
    }
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.columns.cmp(&b.columns)));
    out
}

struct Node {
    cost: f64,
    seq: usize,
    forced: Vec<(usize, usize)>,
    forbidden: Vec<(usize, usize)>,
    solution: Vec<usize>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then(self.seq.cmp(&other.seq))
    }
}

fn constrained(cost: &DMatrix<f64>, forced: &[(usize, usize)], forbidden: &[(usize, usize)]) -> DMatrix<f64> {
    let mut c = cost.clone();
    for &(i, j) in forbidden {
        c[(i, j)] = f64::INFINITY;
    }
    for &(i, j) in forced {
        let keep = c[(i, j)];
        c.row_mut(i).fill(f64::INFINITY);
        c.column_mut(j).fill(f64::INFINITY);
        c[(i, j)] = keep;
    }
    c
}

/// Murty's algorithm: up to `k` distinct assignments in nondecreasing cost.
pub fn murty(cost: &DMatrix<f64>, k: usize) -> Vec<Assignment> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let Some(best) = solve(cost) else {
        return out;
    };
    let mut seq = 0usize;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(Node {
        cost: best.cost,
        seq,
        forced: Vec::new(),
        forbidden: Vec::new(),
        solution: best.columns,
    }));
    while let Some(Reverse(node)) = heap.pop() {
        let n = node.solution.len();
        out.push(Assignment {
            columns: node.solution.clone(),
            cost: node.cost,
        });
        if out.len() >= k {
            break;
        }
        let mut forced = node.forced.clone();
        for row in 0..n {
            let col = node.solution[row];
            if forced.iter().any(|&(i, _)| i == row) {
                continue;
            }
            let mut forbidden = node.forbidden.clone();
            forbidden.push((row, col));
            if let Some(a) = solve(&constrained(cost, &forced, &forbidden)) {
                seq += 1;
                heap.push(Reverse(Node {
                    cost: total_cost(cost, &a.columns),
                    seq,
                    forced: forced.clone(),
                    forbidden,
                    solution: a.columns,
                }));
            }
            forced.push((row, col));
        }
    }
    out
}

/// The `k` cheapest assignments of a `rows × (measurements + rows)` cost
/// matrix. Small problems are enumerated exhaustively, larger ones go through
/// Murty's algorithm.
pub fn ranked_assignments(cost: &DMatrix<f64>, k: usize) -> Vec<Assignment> {
    if k == 0 {
        return Vec::new();
    }
    let (n, cols) = cost.shape();
    let measurements = cols.saturating_sub(n);
    if n * measurements <= ENUMERATION_LIMIT {
        let mut all = enumerate(cost);
        all.truncate(k);
        all
    } else {
        murty(cost, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn square_hungarian() {
        let c = dmatrix![4.0, 1.0, 3.0; 2.0, 0.0, 5.0; 3.0, 2.0, 2.0];
        let a = solve(&c).unwrap();
        assert_eq!(a.cost, 5.0);
    }

    #[test]
    fn rectangular_with_forbidden_entries() {
        let c = dmatrix![1.0, INF, 5.0; INF, 2.0, 1.0];
        let a = solve(&c).unwrap();
        assert_eq!(a.columns, vec![0, 2]);
        assert_eq!(a.cost, 2.0);
    }

    #[test]
    fn infeasible_problem() {
        let c = dmatrix![1.0, INF; 2.0, INF];
        assert!(solve(&c).is_none());
        assert!(murty(&c, 3).is_empty());
        assert!(ranked_assignments(&c, 3).is_empty());
    }

    #[test]
    fn one_row_two_columns() {
        let c = dmatrix![3.0, 1.0];
        let r = ranked_assignments(&c, 5);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].columns, vec![1]);
        assert_eq!(r[1].columns, vec![0]);
    }

    #[test]
    fn zero_k_is_empty() {
        assert!(ranked_assignments(&dmatrix![1.0, 2.0], 0).is_empty());
    }

    #[test]
    fn two_best_of_two_by_two() {
        // rows x (1 measurement + 2 dummies)... use plain 2x2 with distinct costs
        let c = dmatrix![1.0, 7.0; 3.0, 4.0];
        let r = murty(&c, 2);
        let all = enumerate(&c);
        assert_eq!(all.len(), 2);
        assert_eq!(r, all);
        assert_eq!(r[0].cost, 5.0);
        assert_eq!(r[1].cost, 10.0);
    }

    #[test]
    fn k_larger_than_feasible_returns_all() {
        let c = dmatrix![1.0, 2.0, 0.5, INF; 1.5, 0.7, INF, 0.2];
        let all = enumerate(&c);
        let r = murty(&c, 100);
        assert_eq!(r.len(), all.len());
        for (a, b) in r.iter().zip(&all) {
            assert!((a.cost - b.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn murty_matches_enumeration_on_dense_problem() {
        let c = DMatrix::from_fn(4, 6, |i, j| ((i * 7 + j * 13) % 11) as f64 + 0.1 * (i as f64) * (j as f64));
        let all = enumerate(&c);
        let r = murty(&c, all.len() + 5);
        assert_eq!(r.len(), all.len());
        for (a, b) in r.iter().zip(&all) {
            assert!((a.cost - b.cost).abs() < 1e-9);
        }
        let mut cols: Vec<_> = r.iter().map(|a| a.columns.clone()).collect();
        cols.sort();
        cols.dedup();
        assert_eq!(cols.len(), all.len());
    }
}
