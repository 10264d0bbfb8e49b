//! Transition sampling for chains with nonnegative real weights.

use rand::Rng as _;

use crate::chain::{Vertex, WeightedChain};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Row sums may exceed one by at most this much.
const ROW_SLACK: f64 = 1e-12;

/// Cumulative transition rows. A row summing to less than one kills the walk
/// with the remaining probability.
#[derive(Clone, Debug)]
pub struct TransitionTable {
    rows: Vec<Vec<(f64, Vertex)>>,
}

impl TransitionTable {
    pub fn new<S: Scalar>(chain: &WeightedChain<S>) -> Result<Self> {
        let mut rows = Vec::with_capacity(chain.n_vertices());
        for u in 0..chain.n_vertices() {
            let mut acc = 0.0;
            let mut row = Vec::with_capacity(chain.out_edges(u).len());
            for (v, w) in chain.out_edges(u) {
                let z = w.to_complex();
                if z.im != 0.0 || z.re < 0.0 {
                    return Err(Error::Refused(format!(
                        "sampling needs nonnegative real weights; {} -> {} has {z}",
                        chain.label(u),
                        chain.label(*v)
                    )));
                }
                if z.re == 0.0 {
                    continue;
                }
                acc += z.re;
                row.push((acc, *v));
            }
            if chain.is_interior(u) && acc > 1.0 + ROW_SLACK {
                return Err(Error::Refused(format!("row {} sums to {acc} > 1", chain.label(u))));
            }
            rows.push(row);
        }
        Ok(TransitionTable { rows })
    }

    /// Like [`TransitionTable::new`] but insists on a Markov chain.
    pub fn markov<S: Scalar>(chain: &WeightedChain<S>) -> Result<Self> {
        if !chain.is_markov() {
            return Err(Error::Refused("sampling requires Markov weights".into()));
        }
        Self::new(chain)
    }

    /// Next vertex from `v`, or `None` if the walk is killed.
    pub fn step(&self, v: Vertex, rng: &mut Rng) -> Option<Vertex> {
        let row = &self.rows[v];
        let u: f64 = rng.random();
        let i = row.partition_point(|(c, _)| *c <= u);
        row.get(i).map(|(_, w)| *w)
    }

    pub fn row_sum(&self, v: Vertex) -> f64 {
        self.rows[v].last().map_or(0.0, |(c, _)| *c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Symmetry;
    use crate::rng::derive_stream;

    #[test]
    fn killed_mass_matches_deficit() {
        let c = WeightedChain::<f64>::from_labels(&["x"], &["z"], &[("x", "z", 0.25)], Symmetry::General).unwrap();
        let t = TransitionTable::new(&c).unwrap();
        let mut rng = derive_stream(1, 0);
        let n = 200_000;
        let hits = (0..n).filter(|_| t.step(0, &mut rng).is_some()).count();
        let z = crate::stats::binomial_z(hits as u64, n, 0.25);
        assert!(z.abs() < 5.0);
        assert!(TransitionTable::markov(&c).is_err());
    }

    #[test]
    fn negative_weights_refused() {
        let c = WeightedChain::<f64>::from_labels(&["x", "y"], &[], &[("x", "y", -0.1)], Symmetry::General).unwrap();
        assert!(matches!(TransitionTable::new(&c), Err(Error::Refused(_))));
    }
}
