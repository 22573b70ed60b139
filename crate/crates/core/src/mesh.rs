//! Structured triangulation of the unit square.
//!
//! Each grid square `[i/n, (i+1)/n] x [j/n, (j+1)/n]` is split along its
//! lower-left to upper-right diagonal into a lower cell `2k` and an upper
//! cell `2k + 1`, with `k = j n + i`. Both cells are counterclockwise.
//! Vertex `(i, j)` has index `j (n + 1) + i`.
//!
//! P2 nodes are the vertices followed by one midpoint per facet, so node
//! `num_vertices() + f` is the midpoint of facet `f`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::math::{ceil, norm, sqrt, sub, Mat2, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetMark {
    Wall,
    Interior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    vertices: [usize; 2],
    adjacent: [usize; 2],
    n_adjacent: u8,
    mark: FacetMark,
}

impl Facet {
    pub fn vertices(&self) -> [usize; 2] {
        self.vertices
    }

    /// Adjacent cells in increasing index order (one for wall facets).
    pub fn cells(&self) -> &[usize] {
        &self.adjacent[..self.n_adjacent as usize]
    }

    pub fn mark(&self) -> FacetMark {
        self.mark
    }

    pub fn is_wall(&self) -> bool {
        self.mark == FacetMark::Wall
    }
}

/// Affine map from the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMap {
    pub origin: Point,
    /// Columns are the edge vectors `x1 - x0` and `x2 - x0`.
    pub jacobian: Mat2,
    pub inverse: Mat2,
    pub det: f64,
}

impl CellMap {
    pub fn new(x: [Point; 3]) -> Option<Self> {
        let jac = [[x[1][0] - x[0][0], x[2][0] - x[0][0]], [x[1][1] - x[0][1], x[2][1] - x[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inverse = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Some(CellMap { origin: x[0], jacobian: jac, inverse, det })
    }

    pub fn to_physical(&self, xi: Point) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> Point {
        let d = sub(x, self.origin);
        let k = &self.inverse;
        [k[0][0] * d[0] + k[0][1] * d[1], k[1][0] * d[0] + k[1][1] * d[1]]
    }

    /// Reference gradient to physical gradient: `J^{-T} g`.
    #[inline]
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let k = &self.inverse;
        [k[0][0] * g[0] + k[1][0] * g[1], k[0][1] * g[0] + k[1][1] * g[1]]
    }

    /// Reference Hessian to physical Hessian: `J^{-T} H J^{-1}`.
    #[inline]
    pub fn push_hessian(&self, h: &Mat2) -> Mat2 {
        let k = &self.inverse;
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                let mut s = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        s += k[i][a] * h[i][j] * k[j][b];
                    }
                }
                out[a][b] = s;
            }
        }
        out
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMesh {
    n: usize,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    /// `cell_facets[c][k]` is the facet opposite local vertex `k`.
    cell_facets: Vec<[usize; 3]>,
}

impl BackgroundMesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooCoarse(n));
        }
        let nf = n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / nf, j as f64 / nf]);
            }
        }
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut lookup: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut facets: Vec<Facet> = Vec::with_capacity(3 * n * n + 2 * n);
        let mut cell_facets = Vec::with_capacity(cells.len());
        for (c, tri) in cells.iter().enumerate() {
            let mut local = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let f = *lookup.entry(key).or_insert_with(|| {
                    facets.push(Facet {
                        vertices: [key.0, key.1],
                        adjacent: [c, usize::MAX],
                        n_adjacent: 0,
                        mark: FacetMark::Wall,
                    });
                    facets.len() - 1
                });
                let facet = &mut facets[f];
                if facet.n_adjacent == 1 {
                    facet.adjacent[1] = c;
                    facet.mark = FacetMark::Interior;
                }
                facet.n_adjacent += 1;
                local[k] = f;
            }
            cell_facets.push(local);
        }
        Ok(BackgroundMesh { n, vertices, cells, facets, cell_facets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh size `max diam(T) = sqrt(2) / n`.
    pub fn h(&self) -> f64 {
        sqrt(2.0) / self.n as f64
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn cell_facets(&self, cell: usize) -> [usize; 3] {
        self.cell_facets[cell]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let t = self.cells[cell];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn cell_map(&self, cell: usize) -> Result<CellMap> {
        CellMap::new(self.cell_vertices(cell)).ok_or(Error::DegenerateCell(cell))
    }

    pub fn signed_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_vertices(cell);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn barycenter(&self, cell: usize) -> Point {
        let [a, b, c] = self.cell_vertices(cell);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn facet_length(&self, facet: usize) -> f64 {
        let [a, b] = self.facets[facet].vertices;
        norm(sub(self.vertices[b], self.vertices[a]))
    }

    pub fn facet_midpoint(&self, facet: usize) -> Point {
        let [a, b] = self.facets[facet].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Local position of `facet` within `cell`, if it is one of its sides.
    pub fn local_facet(&self, cell: usize, facet: usize) -> Option<usize> {
        self.cell_facets.get(cell)?.iter().position(|&f| f == facet)
    }

    /// Unit normal of `facet` pointing out of `from_cell`.
    pub fn facet_normal(&self, facet: usize, from_cell: usize) -> Result<[f64; 2]> {
        let k = self
            .local_facet(from_cell, facet)
            .ok_or(Error::FacetCellMismatch { facet, cell: from_cell })?;
        let [a, b] = self.facets[facet].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let opposite = self.vertices[self.cells[from_cell][k]];
        let t = sub(pb, pa);
        let len = norm(t);
        let mut normal = [t[1] / len, -t[0] / len];
        let inward = sub(opposite, pa);
        if normal[0] * inward[0] + normal[1] * inward[1] > 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        Ok(normal)
    }

    /// Cell containing `point`. Points on shared edges or vertices go to the
    /// lowest-indexed cell containing them.
    pub fn locate_cell(&self, point: Point) -> Result<usize> {
        let [x, y] = point;
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::PointOutside { x, y });
        }
        let n = self.n;
        let nf = n as f64;
        // grid coordinates within 1e-10 of a grid line are snapped onto it
        let snap = |s: f64| {
            let r = libm::round(s);
            if (s - r).abs() < 1e-10 {
                r
            } else {
                s
            }
        };
        let (gx, gy) = (snap(x * nf), snap(y * nf));
        // ceil - 1 puts grid-line points in the left/lower square, whose
        // cells carry smaller indices
        let square = |s: f64| (ceil(s) as isize - 1).clamp(0, n as isize - 1) as usize;
        let (i, j) = (square(gx), square(gy));
        let s = gx - i as f64;
        let t = gy - j as f64;
        let k = j * n + i;
        Ok(if t <= s { 2 * k } else { 2 * k + 1 })
    }

    pub fn num_p2_nodes(&self) -> usize {
        self.vertices.len() + self.facets.len()
    }

    pub fn p2_node_coord(&self, node: usize) -> Point {
        let nv = self.vertices.len();
        if node < nv {
            self.vertices[node]
        } else {
            self.facet_midpoint(node - nv)
        }
    }

    /// Global P2 nodes of a cell: three vertices, then the midpoints of the
    /// edges opposite to each vertex.
    pub fn cell_p2_nodes(&self, cell: usize) -> [usize; 6] {
        let t = self.cells[cell];
        let f = self.cell_facets[cell];
        let nv = self.vertices.len();
        [t[0], t[1], t[2], nv + f[0], nv + f[1], nv + f[2]]
    }

    /// Whether a P2 node lies on the boundary of the unit square.
    pub fn p2_node_on_wall(&self, node: usize) -> bool {
        let nv = self.vertices.len();
        if node < nv {
            let [x, y] = self.vertices[node];
            x == 0.0 || y == 0.0 || x == 1.0 || y == 1.0
        } else {
            self.facets[node - nv].is_wall()
        }
    }
}
