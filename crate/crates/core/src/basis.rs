//! Lagrange P1/P2 bases on the reference triangle and global dof numbering.
//!
//! P2 local node order: the three vertices, then the midpoints of the edges
//! opposite to vertex 0, 1 and 2.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::DomainClassification;
use crate::math::{Mat2, Point};
use crate::mesh::{BackgroundMesh, CellMap};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceBasis {
    P1,
    P2,
}

/// Values, gradients and Hessians of every basis function at one point.
/// Only the first `count` entries are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tabulation {
    pub count: usize,
    pub values: [f64; 6],
    pub grads: [[f64; 2]; 6],
    pub hessians: [Mat2; 6],
}

const P2_NODES: [Point; 6] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]];

// reference gradients of the barycentric coordinates l0 = 1 - x - y, l1 = x, l2 = y
const BARY_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

impl ReferenceBasis {
    pub fn degree(self) -> usize {
        match self {
            ReferenceBasis::P1 => 1,
            ReferenceBasis::P2 => 2,
        }
    }

    pub fn node_count(self) -> usize {
        match self {
            ReferenceBasis::P1 => 3,
            ReferenceBasis::P2 => 6,
        }
    }

    pub fn nodes(self) -> &'static [Point] {
        &P2_NODES[..self.node_count()]
    }

    pub fn tabulate(self, xi: Point) -> Tabulation {
        let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        let mut t = Tabulation {
            count: self.node_count(),
            values: [0.0; 6],
            grads: [[0.0; 2]; 6],
            hessians: [[[0.0; 2]; 2]; 6],
        };
        match self {
            ReferenceBasis::P1 => {
                for i in 0..3 {
                    t.values[i] = l[i];
                    t.grads[i] = BARY_GRAD[i];
                }
            }
            ReferenceBasis::P2 => {
                for i in 0..3 {
                    let g = BARY_GRAD[i];
                    t.values[i] = l[i] * (2.0 * l[i] - 1.0);
                    let s = 4.0 * l[i] - 1.0;
                    t.grads[i] = [s * g[0], s * g[1]];
                    t.hessians[i] = outer_sym(g, g, 2.0);
                }
                for i in 0..3 {
                    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                    let (ga, gb) = (BARY_GRAD[a], BARY_GRAD[b]);
                    t.values[3 + i] = 4.0 * l[a] * l[b];
                    t.grads[3 + i] = [4.0 * (l[a] * gb[0] + l[b] * ga[0]), 4.0 * (l[a] * gb[1] + l[b] * ga[1])];
                    t.hessians[3 + i] = outer_sym(ga, gb, 4.0);
                }
            }
        }
        t
    }
}

/// `s (a b^T + b a^T)`.
fn outer_sym(a: [f64; 2], b: [f64; 2], s: f64) -> Mat2 {
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = s * (a[i] * b[j] + b[i] * a[j]);
        }
    }
    m
}

impl Tabulation {
    /// Pushes reference derivatives forward through an affine cell map.
    pub fn to_physical(mut self, map: &CellMap) -> Tabulation {
        for i in 0..self.count {
            self.grads[i] = map.push_gradient(self.grads[i]);
            self.hessians[i] = map.push_hessian(&self.hessians[i]);
        }
        self
    }
}

/// Basis values with physical gradients and Hessians at reference point `xi`
/// of `cell`.
pub fn map_basis(mesh: &BackgroundMesh, cell: usize, basis: ReferenceBasis, xi: Point) -> Result<Tabulation> {
    let map = mesh.cell_map(cell)?;
    Ok(basis.tabulate(xi).to_physical(&map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Continuous P2, two components, vanishing on the outer wall.
    VectorP2,
    /// Continuous P1, one component, unconstrained.
    ScalarP1,
}

impl SpaceKind {
    pub fn components(self) -> usize {
        match self {
            SpaceKind::VectorP2 => 2,
            SpaceKind::ScalarP1 => 1,
        }
    }

    pub fn basis(self) -> ReferenceBasis {
        match self {
            SpaceKind::VectorP2 => ReferenceBasis::P2,
            SpaceKind::ScalarP1 => ReferenceBasis::P1,
        }
    }
}

const NONE: u32 = u32::MAX;

/// Numbering of the free dofs of a space on the active mesh.
///
/// Vector dofs are component-blocked: dof `c * free_nodes + k` is component
/// `c` at free node `k`. Free nodes are numbered in increasing global node
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    kind: SpaceKind,
    /// Free index per global node (P2 node ids or vertex ids), `NONE` if the
    /// node is constrained or not touched by an active cell.
    free_index: Vec<u32>,
    active_nodes: usize,
    constrained_nodes: usize,
    free_nodes: usize,
}

impl DofMap {
    pub fn new(mesh: &BackgroundMesh, classification: &DomainClassification, kind: SpaceKind) -> Self {
        let total = match kind {
            SpaceKind::VectorP2 => mesh.num_p2_nodes(),
            SpaceKind::ScalarP1 => mesh.num_vertices(),
        };
        let mut touched = vec![false; total];
        for &c in classification.active_cells() {
            let nodes = mesh.cell_p2_nodes(c);
            for &node in &nodes[..kind.basis().node_count()] {
                touched[node] = true;
            }
        }
        let mut free_index = vec![NONE; total];
        let (mut free, mut constrained, mut active) = (0usize, 0usize, 0usize);
        for (node, &t) in touched.iter().enumerate() {
            if !t {
                continue;
            }
            active += 1;
            if kind == SpaceKind::VectorP2 && mesh.p2_node_on_wall(node) {
                constrained += 1;
            } else {
                free_index[node] = free as u32;
                free += 1;
            }
        }
        DofMap { kind, free_index, active_nodes: active, constrained_nodes: constrained, free_nodes: free }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// All dofs on nodes of active cells, constrained ones included.
    pub fn total_dofs(&self) -> usize {
        self.active_nodes * self.kind.components()
    }

    pub fn constrained_dofs(&self) -> usize {
        self.constrained_nodes * self.kind.components()
    }

    pub fn free_dofs(&self) -> usize {
        self.free_nodes * self.kind.components()
    }

    pub fn free_nodes(&self) -> usize {
        self.free_nodes
    }

    pub fn node_free_index(&self, node: usize) -> Option<usize> {
        match self.free_index[node] {
            NONE => None,
            k => Some(k as usize),
        }
    }

    pub fn dof(&self, node: usize, component: usize) -> Option<usize> {
        self.node_free_index(node).map(|k| component * self.free_nodes + k)
    }

    /// Local-to-global dof table of one cell, component-major
    /// (`[c0 n0..n5, c1 n0..n5]` for vectors).
    pub fn cell_dofs(&self, mesh: &BackgroundMesh, cell: usize) -> ([Option<usize>; 12], usize) {
        let nodes = mesh.cell_p2_nodes(cell);
        let nn = self.kind.basis().node_count();
        let mut out = [None; 12];
        for c in 0..self.kind.components() {
            for i in 0..nn {
                out[c * nn + i] = self.dof(nodes[i], c);
            }
        }
        (out, nn * self.kind.components())
    }
}
