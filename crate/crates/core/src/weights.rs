//! Weight matrix construction and validation.
//!
//! The simulator only guarantees its terminal dichotomy under a symmetric
//! doubly stochastic matrix with dominant diagonal (`w_ii > 1/2`) and exact
//! rational edge weights. Plain Metropolis weights can fail the dominant
//! diagonal rule; the modified variant divides every edge weight by a
//! rational constant `C >= 2` and always passes.

use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::Error;
use crate::graph::Graph;
use crate::numeric::{format_rational, parse_rational, rat, Rational};
use crate::Result;

/// Sparse symmetric weight matrix: off-diagonal entries keyed by neighbor,
/// diagonal stored separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightMatrix {
    n: usize,
    diag: Vec<Rational>,
    off: Vec<BTreeMap<usize, Rational>>,
}

/// Which rule of the weight assumption a matrix violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Symmetry,
    DoublyStochastic,
    DominantDiagonal,
    Sparsity,
    Rationality,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub rule: Rule,
    pub location: String,
}

/// Outcome of checking every rule of the weight assumption.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn satisfied(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("{:?} at {}", v.rule, v.location))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

impl WeightMatrix {
    fn empty(n: usize) -> Self {
        Self {
            n,
            diag: vec![Rational::zero(); n],
            off: vec![BTreeMap::new(); n],
        }
    }

    /// Build a symmetric matrix from per-edge weights; the diagonal absorbs
    /// the remainder so every row sums to exactly 1.
    pub fn from_edge_weights(
        n: usize,
        edge_weights: impl IntoIterator<Item = (usize, usize, Rational)>,
    ) -> Self {
        let mut m = Self::empty(n);
        for (u, v, w) in edge_weights {
            m.off[u].insert(v, w.clone());
            m.off[v].insert(u, w);
        }
        for i in 0..n {
            m.diag[i] = Rational::one() - m.off_diagonal_sum(i);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self, i: usize) -> &Rational {
        &self.diag[i]
    }

    /// Entry `w_ij` (zero for non-neighbors).
    pub fn get(&self, i: usize, j: usize) -> Rational {
        if i == j {
            self.diag[i].clone()
        } else {
            self.off[i].get(&j).cloned().unwrap_or_else(Rational::zero)
        }
    }

    /// Off-diagonal entries of row `i`.
    pub fn neighbor_weights(&self, i: usize) -> impl Iterator<Item = (usize, &Rational)> {
        self.off[i].iter().map(|(&j, w)| (j, w))
    }

    /// `sum_{j != i} w_ij`, i.e. `1 - w_ii` for a stochastic row.
    pub fn off_diagonal_sum(&self, i: usize) -> Rational {
        self.off[i].values().fold(Rational::zero(), |acc, w| acc + w)
    }

    /// Each undirected edge once, as `(u, v, w_uv)` with `u < v`.
    pub fn edge_weights(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        self.off
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().filter(move |(&v, _)| v > u).map(move |(&v, w)| (u, v, w)))
    }

    pub fn min_edge_weight(&self) -> Option<Rational> {
        self.edge_weights().map(|(_, _, w)| w.clone()).min()
    }

    /// Overwrite a single off-diagonal entry (one direction only).
    ///
    /// Breaks the symmetric-construction invariant on purpose; used to build
    /// negative controls for the validation report.
    pub fn set_off_diagonal(&mut self, i: usize, j: usize, w: Rational) {
        assert_ne!(i, j);
        self.off[i].insert(j, w);
    }

    /// Sparse triplet text: header `n`, then `i i num/den` diagonal lines and
    /// `i j num/den` edge lines (each undirected edge once, `i < j`).
    pub fn to_triplet_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.n).unwrap();
        for i in 0..self.n {
            writeln!(out, "{} {} {}", i, i, format_rational(&self.diag[i])).unwrap();
        }
        for (u, v, w) in self.edge_weights() {
            writeln!(out, "{} {} {}", u, v, format_rational(w)).unwrap();
        }
        out
    }

    /// Parse the triplet format written by [`WeightMatrix::to_triplet_text`].
    pub fn from_triplet_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let n: usize = lines
            .next()
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| Error::Parse("missing dimension header".into()))?;
        let mut m = Self::empty(n);
        for line in lines {
            let mut it = line.split_whitespace();
            let (i, j, w) = match (it.next(), it.next(), it.next()) {
                (Some(i), Some(j), Some(w)) => (
                    i.parse::<usize>().map_err(|_| Error::Parse(format!("bad line: {line:?}")))?,
                    j.parse::<usize>().map_err(|_| Error::Parse(format!("bad line: {line:?}")))?,
                    parse_rational(w)?,
                ),
                _ => return Err(Error::Parse(format!("bad triplet line: {line:?}"))),
            };
            if i >= n || j >= n {
                return Err(Error::Parse(format!("index out of range in {line:?}")));
            }
            if i == j {
                m.diag[i] = w;
            } else {
                m.off[i].insert(j, w.clone());
                m.off[j].insert(i, w);
            }
        }
        Ok(m)
    }
}

/// Plain Metropolis weights: `w_ij = 1 / (max{d_i, d_j} + 1)` on edges.
///
/// May fail the dominant-diagonal rule (K2 gives `w_ii = 1/2`); validate
/// separately before running the quantized system.
pub fn metropolis(g: &Graph) -> WeightMatrix {
    WeightMatrix::from_edge_weights(
        g.n(),
        g.edges().iter().map(|&(u, v)| {
            let d = g.degree(u).max(g.degree(v)) as i64;
            (u, v, rat(1, d + 1))
        }),
    )
}

/// Modified Metropolis weights: `w_ij = 1 / (C (max{d_i, d_j} + 1))` with a
/// rational `C >= 2`; always satisfies the weight assumption.
pub fn modified_metropolis(g: &Graph, c: &Rational) -> Result<WeightMatrix> {
    if *c < rat(2, 1) {
        return Err(Error::ParameterOutOfRange(format!(
            "C must be >= 2, got {}",
            format_rational(c)
        )));
    }
    Ok(WeightMatrix::from_edge_weights(
        g.n(),
        g.edges().iter().map(|&(u, v)| {
            let d = g.degree(u).max(g.degree(v)) as i64;
            (u, v, (rat(1, d + 1) / c))
        }),
    ))
}

/// The 2x2 matrix `[[w, 1-w], [1-w, w]]`; the classic cycle-inducing design
/// when `w < 1/2`.
pub fn two_node_cyclic(w: &Rational) -> Result<WeightMatrix> {
    if !(w.is_positive() && *w < Rational::one()) {
        return Err(Error::ParameterOutOfRange(format!(
            "w must be in (0, 1), got {}",
            format_rational(w)
        )));
    }
    Ok(WeightMatrix::from_edge_weights(
        2,
        [(0usize, 1usize, Rational::one() - w)],
    ))
}

/// Check all four rules of the weight assumption exactly, reporting every
/// violation rather than failing fast.
pub fn validate_assumption1(w: &WeightMatrix, g: &Graph) -> AssumptionReport {
    let mut violations = Vec::new();
    assert_eq!(w.n(), g.n(), "dimension mismatch");
    let half = rat(1, 2);
    for i in 0..w.n() {
        // Symmetry and entry range.
        for (j, wij) in w.neighbor_weights(i) {
            let wji = w.get(j, i);
            if *wij != wji && i < j {
                violations.push(Violation {
                    rule: Rule::Symmetry,
                    location: format!("({i}, {j})"),
                });
            }
            if !g.has_edge(i, j) && !wij.is_zero() {
                violations.push(Violation {
                    rule: Rule::Sparsity,
                    location: format!("({i}, {j})"),
                });
            }
        }
        // Every edge must carry a weight strictly inside (0, 1).
        for &j in g.neighbors(i) {
            if j > i {
                let wij = w.get(i, j);
                if !(wij.is_positive() && wij < Rational::one()) {
                    violations.push(Violation {
                        rule: Rule::Rationality,
                        location: format!("({i}, {j})"),
                    });
                }
            }
        }
        // Row and column sums.
        let row: Rational = (0..w.n()).map(|j| w.get(i, j)).sum();
        let col: Rational = (0..w.n()).map(|j| w.get(j, i)).sum();
        if !row.is_one() || !col.is_one() {
            violations.push(Violation {
                rule: Rule::DoublyStochastic,
                location: format!("row/col {i}"),
            });
        }
        if *w.diagonal(i) <= half {
            violations.push(Violation {
                rule: Rule::DominantDiagonal,
                location: format!("node {i}"),
            });
        }
    }
    AssumptionReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{compute_gamma, rat_int, GridConstants};

    fn row_sums_one(w: &WeightMatrix) {
        for i in 0..w.n() {
            let row: Rational = (0..w.n()).map(|j| w.get(i, j)).sum();
            assert!(row.is_one(), "row {i} sums to {row}");
        }
    }

    #[test]
    fn metropolis_path3() {
        let g = Graph::path(3).unwrap();
        let w = metropolis(&g);
        assert_eq!(w.get(0, 1), rat(1, 3));
        assert_eq!(w.get(1, 2), rat(1, 3));
        assert_eq!(*w.diagonal(0), rat(2, 3));
        assert_eq!(*w.diagonal(1), rat(1, 3));
        assert_eq!(*w.diagonal(2), rat(2, 3));
        row_sums_one(&w);
    }

    #[test]
    fn metropolis_k2_is_uniform_and_fails_dominance() {
        let g = Graph::complete(2).unwrap();
        let w = metropolis(&g);
        assert_eq!(w.get(0, 1), rat(1, 2));
        assert_eq!(*w.diagonal(0), rat(1, 2));
        let report = validate_assumption1(&w, &g);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == Rule::DominantDiagonal));
    }

    #[test]
    fn modified_metropolis_k2_and_path3() {
        let g = Graph::complete(2).unwrap();
        let w = modified_metropolis(&g, &rat_int(2)).unwrap();
        assert_eq!(w.get(0, 1), rat(1, 4));
        assert_eq!(*w.diagonal(0), rat(3, 4));

        let g = Graph::path(3).unwrap();
        let w = modified_metropolis(&g, &rat_int(2)).unwrap();
        assert_eq!(w.get(0, 1), rat(1, 6));
        assert_eq!(*w.diagonal(0), rat(5, 6));
        assert_eq!(*w.diagonal(1), rat(2, 3));
        row_sums_one(&w);
        assert!(validate_assumption1(&w, &g).satisfied());
    }

    #[test]
    fn modified_metropolis_rejects_small_c() {
        let g = Graph::path(3).unwrap();
        assert!(matches!(
            modified_metropolis(&g, &rat(3, 2)),
            Err(Error::ParameterOutOfRange(_))
        ));
    }

    #[test]
    fn modified_metropolis_alpha_bound() {
        // alpha_i <= 1/C with gamma from the grid construction.
        for n in [4usize, 7, 12] {
            let g = Graph::erdos_renyi(n, &rat(1, 2), n as u64).unwrap();
            for c in [rat_int(2), rat_int(5), rat(5, 2)] {
                let w = modified_metropolis(&g, &c).unwrap();
                assert!(validate_assumption1(&w, &g).satisfied());
                let x0: Vec<Rational> = (0..n).map(|i| rat(i as i64, 1)).collect();
                let gc = GridConstants::compute(&w, &x0).unwrap();
                assert!(gc.alpha_max() <= Rational::one() / &c, "n={n} C={c}");
            }
        }
    }

    #[test]
    fn two_node_cyclic_entries() {
        let w = two_node_cyclic(&rat(1, 25)).unwrap();
        assert_eq!(w.get(0, 1), rat(24, 25));
        assert_eq!(*w.diagonal(0), rat(1, 25));
        let g = Graph::complete(2).unwrap();
        let report = validate_assumption1(&w, &g);
        let dominant: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.rule == Rule::DominantDiagonal)
            .collect();
        assert_eq!(dominant.len(), 2);

        let uniform = two_node_cyclic(&rat(1, 2)).unwrap();
        assert_eq!(uniform.get(0, 1), rat(1, 2));
        let ok = two_node_cyclic(&rat(3, 5)).unwrap();
        assert!(validate_assumption1(&ok, &g)
            .violations
            .iter()
            .all(|v| v.rule != Rule::DominantDiagonal));
    }

    #[test]
    fn asymmetric_injection_flags_symmetry() {
        let g = Graph::path(3).unwrap();
        let mut w = modified_metropolis(&g, &rat_int(2)).unwrap();
        w.set_off_diagonal(0, 1, rat(1, 7));
        let report = validate_assumption1(&w, &g);
        assert!(report.violations.iter().any(|v| v.rule == Rule::Symmetry));
    }

    #[test]
    fn triplet_round_trip() {
        let g = Graph::erdos_renyi(8, &rat(2, 5), 3).unwrap();
        let w = modified_metropolis(&g, &rat(5, 2)).unwrap();
        let text = w.to_triplet_text();
        let back = WeightMatrix::from_triplet_text(&text).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn gamma_exists_for_modified_metropolis() {
        let g = Graph::path(3).unwrap();
        let w = modified_metropolis(&g, &rat_int(2)).unwrap();
        let gamma = compute_gamma(&w, &vec![rat_int(0); 3]).unwrap();
        assert!(gamma.is_positive());
    }
}
