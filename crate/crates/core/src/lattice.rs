//! Periodic honeycomb supercells and generic edge-list graphs.
//!
//! Vertex indexing for generated supercells is row-major over unit cells with
//! the sublattice as the minor index: site `s` of cell `(row, col)` is
//! `2 * (row * dim + col) + s`. Sublattice 0 sites bond to the sublattice 1
//! site of the same cell, of the cell to the left and of the cell above, with
//! coordinates wrapped modulo `dim`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Undirected simple graph over `n_sites` vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGraph {
    n_sites: usize,
    edges: BTreeSet<(usize, usize)>,
    /// `Some(dim)` for generated supercells, `None` for loaded graphs.
    supercell_dim: Option<usize>,
}

impl LatticeGraph {
    /// Builds the `dim x dim` periodic graphene supercell (a 3-regular graph
    /// with `2 dim^2` sites).
    pub fn supercell(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DegenerateWrap(dim));
        }
        let site = |row: usize, col: usize, sub: usize| 2 * (row * dim + col) + sub;
        let mut edges = BTreeSet::new();
        for row in 0..dim {
            for col in 0..dim {
                let a = site(row, col, 0);
                let left = (col + dim - 1) % dim;
                let up = (row + dim - 1) % dim;
                for b in [site(row, col, 1), site(row, left, 1), site(up, col, 1)] {
                    edges.insert(ordered(a, b));
                }
            }
        }
        debug_assert_eq!(edges.len(), 3 * dim * dim);
        Ok(Self { n_sites: 2 * dim * dim, edges, supercell_dim: Some(dim) })
    }

    /// Builds a graph from an explicit edge list. Duplicate pairs, self-loops
    /// and out-of-range indices are rejected.
    pub fn from_edges(n_sites: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for (k, (i, j)) in pairs.into_iter().enumerate() {
            check_pair(n_sites, i, j, &edges).map_err(|msg| Error::Parse { line: k + 1, msg })?;
            edges.insert(ordered(i, j));
        }
        Ok(Self { n_sites, edges, supercell_dim: None })
    }

    /// Parses the edge-list text format: a header line `N <count>` followed
    /// by one whitespace-separated 0-based `i j` pair per line. Blank lines
    /// and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let (n, edges) = parse_edge_list(text, "N")?;
        Ok(Self { n_sites: n, edges, supercell_dim: None })
    }

    pub fn to_edge_list(&self) -> String {
        write_edge_list("N", self.n_sites, &self.edges)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn supercell_dim(&self) -> Option<usize> {
        self.supercell_dim
    }

    /// Edges as ordered pairs `(i, j)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&ordered(i, j))
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_sites];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_sites];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.n_sites]; self.n_sites];
        for &(i, j) in &self.edges {
            a[i][j] = 1;
            a[j][i] = 1;
        }
        a
    }

    pub fn is_connected(&self) -> bool {
        if self.n_sites == 0 {
            return true;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; self.n_sites];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n_sites
    }

    /// Two-colours the graph by BFS; `None` if an odd cycle exists.
    pub fn bipartition(&self) -> Option<Vec<u8>> {
        let adj = self.neighbors();
        let mut colour = vec![u8::MAX; self.n_sites];
        for start in 0..self.n_sites {
            if colour[start] != u8::MAX {
                continue;
            }
            colour[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if colour[w] == u8::MAX {
                        colour[w] = 1 - colour[v];
                        queue.push_back(w);
                    } else if colour[w] == colour[v] {
                        return None;
                    }
                }
            }
        }
        Some(colour)
    }
}

fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

fn check_pair(n: usize, i: usize, j: usize, seen: &BTreeSet<(usize, usize)>) -> std::result::Result<(), String> {
    if i >= n || j >= n {
        return Err(format!("index out of range for {n} vertices: {i} {j}"));
    }
    if i == j {
        return Err(format!("self-loop on vertex {i}"));
    }
    if seen.contains(&ordered(i, j)) {
        return Err(format!("duplicate edge {i} {j}"));
    }
    Ok(())
}

/// Shared parser for the `N`/`PHYS` edge-list formats.
pub(crate) fn parse_edge_list(text: &str, header: &str) -> Result<(usize, BTreeSet<(usize, usize)>)> {
    let mut n: Option<usize> = None;
    let mut edges = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match n {
            None => {
                if fields.len() != 2 || fields[0] != header {
                    return Err(parse_err(format!("expected header `{header} <count>`, found `{line}`")));
                }
                let count = fields[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad vertex count `{}`: {e}", fields[1])))?;
                n = Some(count);
            }
            Some(n) => {
                if fields.len() != 2 {
                    return Err(parse_err(format!("expected `i j`, found `{line}`")));
                }
                let i = fields[0].parse::<usize>().map_err(|e| parse_err(format!("bad index `{}`: {e}", fields[0])))?;
                let j = fields[1].parse::<usize>().map_err(|e| parse_err(format!("bad index `{}`: {e}", fields[1])))?;
                check_pair(n, i, j, &edges).map_err(parse_err)?;
                edges.insert(ordered(i, j));
            }
        }
    }
    let n = n.ok_or(Error::Parse { line: 1, msg: format!("missing `{header} <count>` header") })?;
    Ok((n, edges))
}

pub(crate) fn write_edge_list(header: &str, n: usize, edges: &BTreeSet<(usize, usize)>) -> String {
    let mut out = format!("{header} {n}\n");
    for (i, j) in edges {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}
