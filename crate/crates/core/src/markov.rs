//! Irreducibility and invariant distributions of the output process.

use crate::channel::{Distribution, OutputKernel};
use crate::error::{Error, Result};
use crate::linalg;

/// Entries above this are treated as structural edges.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// `reach[i][j]`: state `j` can be reached from `i` in zero or more steps.
fn reachability(n: usize, edge: &dyn Fn(usize, usize) -> bool) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; n]; n];
    for (start, seen) in reach.iter_mut().enumerate() {
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && edge(i, j) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    reach
}

/// Closed communicating classes of the graph `edge(i, j)`, each sorted, in
/// order of their smallest member.
pub(crate) fn closed_classes_of(n: usize, edge: &dyn Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let reach = reachability(n, edge);
    let mut assigned = vec![false; n];
    let mut classes = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        class.iter().for_each(|&j| assigned[j] = true);
        let closed = class
            .iter()
            .all(|&j| (0..n).all(|k| !reach[j][k] || class.contains(&k)));
        if closed {
            classes.push(class);
        }
    }
    classes
}

pub(crate) fn strongly_connected(n: usize, edge: &dyn Fn(usize, usize) -> bool) -> bool {
    reachability(n, edge).iter().all(|row| row.iter().all(|&r| r))
}

/// True iff the transition graph (edges where `P(b | b_prev) > 1e-12`) is
/// strongly connected.
pub fn is_irreducible(kernel: &OutputKernel) -> bool {
    strongly_connected(kernel.size(), &|i, j| kernel.prob(i, j) > SUPPORT_THRESHOLD)
}

/// Closed communicating classes of the output chain.
pub fn closed_classes(kernel: &OutputKernel) -> Vec<Vec<usize>> {
    closed_classes_of(kernel.size(), &|i, j| kernel.prob(i, j) > SUPPORT_THRESHOLD)
}

/// The unique invariant law `nu` with `nu(b) = sum_{b'} nu(b') P(b | b')`.
pub fn stationary_distribution(kernel: &OutputKernel) -> Result<Distribution> {
    if !is_irreducible(kernel) {
        return Err(Error::Reducible {
            closed_classes: closed_classes(kernel),
            hint: "",
        });
    }
    let n = kernel.size();
    // Balance equations for states 0..n-1, the last replaced by sum(nu) = 1.
    let mut a = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for j in 0..n - 1 {
        for i in 0..n {
            a[j * n + i] = kernel.prob(i, j) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..n {
        a[(n - 1) * n + i] = 1.0;
    }
    rhs[n - 1] = 1.0;
    let mut nu = linalg::solve(a, rhs)?;
    nu.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|x| *x /= total);
    Ok(Distribution::from_trusted(nu))
}
