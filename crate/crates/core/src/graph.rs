//! Undirected simple connected graphs: deterministic constructions, seeded
//! random generators, and the edge-list text format used by the CLI.
//!
//! Randomness comes from `ChaCha8` seeded with a user-provided `u64`, so a
//! given seed produces the same graph on every platform. Connectivity is
//! enforced by rejection: each retry re-seeds the generator with a derived
//! seed, up to a fixed budget.

use num_bigint::BigInt;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::Error;
use crate::numeric::Rational;
use crate::Result;

/// Retry budget for rejection sampling of connected graphs.
pub const CONNECTIVITY_RETRIES: usize = 1000;

/// Undirected simple connected graph over nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

/// Node positions on the unit square together with the connectivity radius.
#[derive(Debug, Clone)]
pub struct GeometricLayout {
    pub positions: Vec<(Rational, Rational)>,
    pub radius: Rational,
}

impl Graph {
    /// Build from an explicit edge list, validating simplicity and connectivity.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::ParameterOutOfRange(format!(
                "graph needs at least 2 nodes, got {n}"
            )));
        }
        let mut adj = vec![Vec::new(); n];
        let mut canonical = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::ParameterOutOfRange(format!(
                    "edge ({u}, {v}) out of range for n={n}"
                )));
            }
            if u == v {
                return Err(Error::ParameterOutOfRange(format!("self-loop at node {u}")));
            }
            let e = (u.min(v), u.max(v));
            if adj[e.0].contains(&e.1) {
                return Err(Error::ParameterOutOfRange(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            adj[e.0].push(e.1);
            adj[e.1].push(e.0);
            canonical.push(e);
        }
        canonical.sort_unstable();
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
        let g = Self { n, edges: canonical, adj };
        if !g.is_connected() {
            return Err(Error::ConnectivityFailure { attempts: 0 });
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// BFS reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Path 0 - 1 - ... - (n-1).
    pub fn path(n: usize) -> Result<Self> {
        Self::from_edges(n, (0..n.saturating_sub(1)).map(|i| (i, i + 1)))
    }

    /// Complete graph on `n` nodes.
    pub fn complete(n: usize) -> Result<Self> {
        Self::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    /// Complete bipartite graph; left nodes are `0..n_left`.
    /// With `n_left == n_right` this is the regular bipartite construction.
    pub fn complete_bipartite(n_left: usize, n_right: usize) -> Result<Self> {
        if n_left < 1 || n_right < 1 {
            return Err(Error::ParameterOutOfRange("bipartite sides must be >= 1".into()));
        }
        Self::from_edges(
            n_left + n_right,
            (0..n_left).flat_map(|u| (0..n_right).map(move |v| (u, n_left + v))),
        )
    }

    /// Erdos-Renyi G(n, p) conditioned on connectivity.
    ///
    /// Each candidate edge is kept with exact probability `p` (a rational
    /// compared against a uniform integer draw). Disconnected samples are
    /// rejected and regenerated from a derived seed.
    pub fn erdos_renyi(n: usize, p: &Rational, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::ParameterOutOfRange(format!("n must be > 1, got {n}")));
        }
        if !(*p > Rational::new(BigInt::from(0), BigInt::one()) && *p <= Rational::one()) {
            return Err(Error::ParameterOutOfRange(format!("p must be in (0, 1], got {p}")));
        }
        let num = u64::try_from(p.numer()).map_err(|_| {
            Error::ParameterOutOfRange("p numerator does not fit in u64".into())
        })?;
        let den = u64::try_from(p.denom()).map_err(|_| {
            Error::ParameterOutOfRange("p denominator does not fit in u64".into())
        })?;
        for attempt in 0..CONNECTIVITY_RETRIES {
            let mut rng = derived_rng(seed, attempt);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_range(0..den) < num {
                        edges.push((u, v));
                    }
                }
            }
            if let Ok(g) = Self::from_edges(n, edges) {
                return Ok(g);
            }
        }
        Err(Error::ConnectivityFailure { attempts: CONNECTIVITY_RETRIES })
    }

    /// Random geometric graph on the unit square with connectivity radius
    /// `radius`, conditioned on connectivity.
    ///
    /// Positions are drawn on a `2^-32` grid so that the distance predicate
    /// `dx^2 + dy^2 <= radius^2` is evaluated exactly.
    pub fn random_geometric(n: usize, radius: &Rational, seed: u64) -> Result<(Self, GeometricLayout)> {
        if n < 2 {
            return Err(Error::ParameterOutOfRange(format!("n must be > 1, got {n}")));
        }
        if *radius <= Rational::new(BigInt::from(0), BigInt::one()) {
            return Err(Error::ParameterOutOfRange("radius must be positive".into()));
        }
        let r2 = radius * radius;
        for attempt in 0..CONNECTIVITY_RETRIES {
            let mut rng = derived_rng(seed, attempt);
            let positions: Vec<(Rational, Rational)> = (0..n)
                .map(|_| {
                    let x = Rational::new(BigInt::from(rng.gen::<u32>()), BigInt::from(1u64 << 32));
                    let y = Rational::new(BigInt::from(rng.gen::<u32>()), BigInt::from(1u64 << 32));
                    (x, y)
                })
                .collect();
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    let dx = &positions[u].0 - &positions[v].0;
                    let dy = &positions[u].1 - &positions[v].1;
                    if &dx * &dx + &dy * &dy <= r2 {
                        edges.push((u, v));
                    }
                }
            }
            if let Ok(g) = Self::from_edges(n, edges) {
                return Ok((g, GeometricLayout { positions, radius: radius.clone() }));
            }
        }
        Err(Error::ConnectivityFailure { attempts: CONNECTIVITY_RETRIES })
    }

    /// RGG with radius `R = sqrt(c * ln(n) / n)`.
    ///
    /// The square root is evaluated in f64 and then frozen into an exact
    /// rational, so downstream geometry stays exact and reproducible.
    pub fn random_geometric_c(n: usize, c: f64, seed: u64) -> Result<(Self, GeometricLayout)> {
        if c <= 0.0 {
            return Err(Error::ParameterOutOfRange("c must be positive".into()));
        }
        let r = (c * (n as f64).ln() / n as f64).sqrt();
        let radius = Rational::from_float(r)
            .ok_or_else(|| Error::ParameterOutOfRange("radius not finite".into()))?;
        Self::random_geometric(n, &radius, seed)
    }

    /// Edge-list text: header `n m`, then one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.n, self.edges.len()).unwrap();
        for (u, v) in &self.edges {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    /// Parse the edge-list text format produced by [`Graph::to_edge_list`].
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad header".into()))?;
        let m: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad header".into()))?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let mut it = line.split_whitespace();
            let u: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad edge line: {line:?}")))?;
            let v: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad edge line: {line:?}")))?;
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!("expected {m} edges, found {}", edges.len())));
        }
        Self::from_edges(n, edges)
    }
}

fn derived_rng(seed: u64, attempt: usize) -> ChaCha8Rng {
    // Distinct stream per retry; the multiplier is the usual splitmix constant.
    ChaCha8Rng::seed_from_u64(seed.wrapping_add((attempt as u64).wrapping_mul(0x9E3779B97F4A7C15)))
}
