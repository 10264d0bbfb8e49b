//! Small chains used as fixtures: the two-point chain, paths, grids, and
//! random integrable weights.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::Rng as _;

use crate::chain::{Symmetry, Vertex, WeightedChain};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Interior `{x, y}`, no boundary, `q(x, y) = q(y, x) = q`. With `q = 1/2`
/// the only elementary loop at `x` is `[x, y, x]` with weight `1/4`.
pub fn two_point<S: Scalar>(q: S) -> WeightedChain<S> {
    WeightedChain::from_labels(&["x", "y"], &[], &[("x", "y", q)], Symmetry::Symmetric).expect("valid two-point chain")
}

/// Two-vertex symmetric chain with self-edges, given by its `θ` values.
pub fn two_point_theta(theta_xx: f64, theta_xy: f64, theta_yy: f64) -> WeightedChain<f64> {
    let mut edges = vec![("x", "y", theta_xy / 2.0)];
    if theta_xx != 0.0 {
        edges.push(("x", "x", theta_xx));
    }
    if theta_yy != 0.0 {
        edges.push(("y", "y", theta_yy));
    }
    WeightedChain::from_labels(&["x", "y"], &[], &edges, Symmetry::Symmetric).expect("valid two-point chain")
}

/// Simple random walk on `{1, …, n}` stopped at `0` and `n + 1`.
pub fn path_srw(n: usize) -> WeightedChain<f64> {
    let interior: Vec<String> = (1..=n).map(|k| k.to_string()).collect();
    let boundary = vec!["0".to_string(), (n + 1).to_string()];
    let idx = |k: usize| if k == 0 { n } else if k == n + 1 { n + 1 } else { k - 1 };
    let mut edges = Vec::new();
    for k in 1..=n {
        edges.push((idx(k), idx(k - 1), 0.5));
        edges.push((idx(k), idx(k + 1), 0.5));
    }
    WeightedChain::new(interior, boundary, edges, Symmetry::General).expect("valid path chain")
}

pub fn lattice_label(p: (i64, i64)) -> String {
    format!("{},{}", p.0, p.1)
}

const NEIGHBOURS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Nearest-neighbour chain on a finite set of `Z²` points. The boundary is the
/// set of outside neighbours, sorted; boundary-to-interior edges are included
/// so boundary Poisson kernels are defined. `weight(u, v)` gives the weight
/// of the directed edge `u → v`.
pub fn lattice_chain<S: Scalar>(interior: &[(i64, i64)], weight: impl Fn((i64, i64), (i64, i64)) -> S) -> WeightedChain<S> {
    let inside: BTreeSet<(i64, i64)> = interior.iter().copied().collect();
    let boundary: Vec<(i64, i64)> = interior
        .iter()
        .flat_map(|&(x, y)| NEIGHBOURS.iter().map(move |(dx, dy)| (x + dx, y + dy)))
        .filter(|p| !inside.contains(p))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let all: Vec<(i64, i64)> = interior.iter().chain(&boundary).copied().collect();
    let index: std::collections::HashMap<(i64, i64), Vertex> = all.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let mut edges = Vec::new();
    for &u in interior {
        for (dx, dy) in NEIGHBOURS {
            let v = (u.0 + dx, u.1 + dy);
            edges.push((index[&u], index[&v], weight(u, v)));
            if !inside.contains(&v) {
                edges.push((index[&v], index[&u], weight(v, u)));
            }
        }
    }
    WeightedChain::new(
        interior.iter().map(|p| lattice_label(*p)).collect(),
        boundary.iter().map(|p| lattice_label(*p)).collect(),
        edges,
        Symmetry::General,
    )
    .expect("lattice chains are valid")
}

/// Points of the `w × h` block with lower-left corner at the origin, row by row.
pub fn block(w: usize, h: usize) -> Vec<(i64, i64)> {
    (0..h as i64).flat_map(|y| (0..w as i64).map(move |x| (x, y))).collect()
}

/// Simple random walk on a `w × h` block, stopped on leaving it.
pub fn grid_srw(w: usize, h: usize) -> WeightedChain<f64> {
    lattice_chain(&block(w, h), |_, _| 0.25)
}

/// Symmetric nearest-neighbour weight `q` on a `w × h` block with no boundary
/// vertices; mass leaving the block is killed.
pub fn grid_killed(w: usize, h: usize, q: f64) -> WeightedChain<f64> {
    let pts = block(w, h);
    let mut edges = Vec::new();
    for (i, a) in pts.iter().enumerate() {
        for (j, b) in pts.iter().enumerate() {
            if (a.0 - b.0).abs() + (a.1 - b.1).abs() == 1 {
                edges.push((i, j, q));
            }
        }
    }
    WeightedChain::new(pts.iter().map(|p| lattice_label(*p)).collect(), Vec::new(), edges, Symmetry::Symmetric)
        .expect("valid grid")
}

/// Random weights on `n` interior vertices with one boundary vertex, scaled so
/// every row of `|Q|` sums to at most `0.9`; hence integrable. Roughly half of
/// the edges carry a complex phase when `complex` is set.
pub fn random_integrable(n: usize, complex: bool, rng: &mut Rng) -> WeightedChain<Complex64> {
    let mut edges = Vec::new();
    let mut row_abs = vec![0.0; n];
    for u in 0..n {
        for v in 0..=n {
            if rng.random::<f64>() < 0.6 {
                let r: f64 = rng.random_range(-1.0..1.0);
                let w = if complex && rng.random::<bool>() {
                    Complex64::from_polar(r.abs(), rng.random_range(0.0..std::f64::consts::TAU))
                } else {
                    Complex64::new(r, 0.0)
                };
                if v < n {
                    row_abs[u] += w.norm();
                }
                edges.push((u, v, w));
            }
        }
    }
    let scale = 0.9 / row_abs.iter().cloned().fold(1e-12, f64::max);
    let edges: Vec<_> = edges.into_iter().map(|(u, v, w)| (u, v, w * scale.min(1.0))).collect();
    WeightedChain::new((0..n).map(|i| format!("v{i}")).collect(), vec!["z".into()], edges, Symmetry::General)
        .expect("valid random chain")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_boundary_size() {
        let c = grid_srw(3, 3);
        assert_eq!(c.n_interior(), 9);
        assert_eq!(c.n_vertices() - 9, 12);
        assert!(c.is_markov());
    }

    #[test]
    fn random_chains_are_integrable() {
        let mut rng = crate::rng::derive_stream(5, 0);
        for _ in 0..20 {
            let c = random_integrable(6, true, &mut rng);
            assert!(c.classify().is_integrable());
        }
    }
}
