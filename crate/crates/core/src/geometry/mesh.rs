use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Structured triangulation of the unit square.
///
/// Nodes form an `(n_div+1) x (n_div+1)` lattice numbered row by row
/// (`index = j * (n_div + 1) + i` for the node at `(i/n_div, j/n_div)`).
/// Every lattice cell is cut along its lower-left to upper-right diagonal;
/// triangles are listed counter-clockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredTriMesh {
    n_div: usize,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_nodes: Vec<usize>,
    is_boundary: Vec<bool>,
}

impl StructuredTriMesh {
    pub fn unit_square(n_div: usize) -> Result<Self> {
        if n_div == 0 {
            return Err(Error::InvalidArgument("mesh needs n_div >= 1".into()));
        }
        let n1 = n_div + 1;
        let h = 1.0 / n_div as f64;
        let mut nodes = Vec::with_capacity(n1 * n1);
        let mut is_boundary = Vec::with_capacity(n1 * n1);
        for j in 0..n1 {
            for i in 0..n1 {
                // exact endpoints, so boundary coordinates are exactly 0 or 1
                let x = if i == n_div { 1.0 } else { i as f64 * h };
                let y = if j == n_div { 1.0 } else { j as f64 * h };
                nodes.push([x, y]);
                is_boundary.push(i == 0 || j == 0 || i == n_div || j == n_div);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n_div * n_div);
        for j in 0..n_div {
            for i in 0..n_div {
                let a = j * n1 + i;
                triangles.push([a, a + 1, a + n1 + 1]);
                triangles.push([a, a + n1 + 1, a + n1]);
            }
        }
        let boundary_nodes = (0..nodes.len()).filter(|&k| is_boundary[k]).collect();
        Ok(Self {
            n_div,
            nodes,
            triangles,
            boundary_nodes,
            is_boundary,
        })
    }

    pub fn n_div(&self) -> usize {
        self.n_div
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_div as f64
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.is_boundary[node]
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&k| !self.is_boundary[k])
            .collect()
    }

    /// Signed area of triangle `t` (positive for counter-clockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn barycenter(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Index of the node obtained by mirroring `node` across the diagonal
    /// `x = y`.
    pub fn mirror_node(&self, node: usize) -> usize {
        let n1 = self.n_div + 1;
        let (j, i) = (node / n1, node % n1);
        i * n1 + j
    }

    /// Plain-text listing, one record per line: a header, then `node`,
    /// `tri` and `boundary` records.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# structured unit-square mesh n_div={} nodes={} triangles={}",
            self.n_div,
            self.nodes.len(),
            self.triangles.len()
        );
        for (k, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "node {k} {:.17e} {:.17e}", p[0], p[1]);
        }
        for (k, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(s, "tri {k} {} {} {}", t[0], t[1], t[2]);
        }
        for &b in &self.boundary_nodes {
            let _ = writeln!(s, "boundary {b}");
        }
        s
    }
}
