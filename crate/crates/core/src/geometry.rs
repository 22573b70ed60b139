//! Level set, radial cut-off, their P2 interpolants, and the split of the
//! background mesh into active, cut and discarded cells.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::ReferenceBasis;
use crate::math::{dense_solve, powi, sqrt, Point, ScalarJet};
use crate::mesh::BackgroundMesh;
use crate::{Error, Result};

/// A scalar field on the plane.
pub trait ScalarFunction {
    fn eval(&self, p: Point) -> f64;
}

impl<F: Fn(Point) -> f64> ScalarFunction for F {
    fn eval(&self, p: Point) -> f64 {
        self(p)
    }
}

/// `phi(x) = R^2 - |x - center|^2`: positive inside the disk (the solid),
/// negative in the fluid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSet {
    pub center: Point,
    pub radius: f64,
}

impl LevelSet {
    pub fn new(center: Point, radius: f64) -> Self {
        LevelSet { center, radius }
    }
}

impl ScalarFunction for LevelSet {
    fn eval(&self, p: Point) -> f64 {
        let (dx, dy) = (p[0] - self.center[0], p[1] - self.center[1]);
        self.radius * self.radius - dx * dx - dy * dy
    }
}

/// Radial C^2 cut-off: 1 up to `r0`, 0 from `r1`, quintic in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub r0: f64,
    pub r1: f64,
    /// Coefficients in `t = (r - r0) / (r1 - r0)`, lowest degree first.
    coeffs: [f64; 6],
}

impl CutoffProfile {
    /// Fits the quintic to value 1 and zero first and second derivatives at
    /// `r0`, and value, first and second derivatives all zero at `r1`.
    pub fn new(r0: f64, r1: f64) -> Result<Self> {
        if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) {
            return Err(Error::InvalidCutoff { r0, r1 });
        }
        // rows: p(0), p'(0), p''(0), p(1), p'(1), p''(1) in the t variable
        let mut a = [[0.0; 6]; 6];
        for k in 0..6 {
            let kf = k as f64;
            a[0][k] = if k == 0 { 1.0 } else { 0.0 };
            a[1][k] = if k == 1 { 1.0 } else { 0.0 };
            a[2][k] = if k == 2 { 2.0 } else { 0.0 };
            a[3][k] = 1.0;
            a[4][k] = kf;
            a[5][k] = kf * (kf - 1.0);
        }
        let coeffs = dense_solve(a, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).ok_or(Error::InvalidCutoff { r0, r1 })?;
        Ok(CutoffProfile { r0, r1, coeffs })
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.r0 {
            1.0
        } else if r >= self.r1 {
            0.0
        } else {
            let t = (r - self.r0) / (self.r1 - self.r0);
            self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
        }
    }

    /// Derivative of order `k` (0..=2) with respect to `r`.
    pub fn derivative(&self, r: f64, k: usize) -> f64 {
        if r <= self.r0 || r >= self.r1 {
            return if k == 0 { self.eval(r) } else { 0.0 };
        }
        let len = self.r1 - self.r0;
        let t = (r - self.r0) / len;
        let mut s = 0.0;
        for (j, &c) in self.coeffs.iter().enumerate().skip(k) {
            let falling: f64 = (0..k).map(|m| (j - m) as f64).product();
            s += c * falling * powi(t, (j - k) as u32);
        }
        s / powi(len, k as u32)
    }
}

/// A continuous P2 field on the whole background mesh, one coefficient per
/// P2 node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarP2Field {
    values: Vec<f64>,
}

impl ScalarP2Field {
    pub fn from_values(values: Vec<f64>) -> Self {
        ScalarP2Field { values }
    }

    pub fn zeros(mesh: &BackgroundMesh) -> Self {
        ScalarP2Field { values: vec![0.0; mesh.num_p2_nodes()] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_coefficients(&self, mesh: &BackgroundMesh, cell: usize) -> [f64; 6] {
        mesh.cell_p2_nodes(cell).map(|n| self.values[n])
    }

    /// Value, physical gradient and Hessian on `cell` at reference point `xi`.
    pub fn jet(&self, mesh: &BackgroundMesh, cell: usize, xi: Point) -> Result<ScalarJet> {
        let map = mesh.cell_map(cell)?;
        let tab = ReferenceBasis::P2.tabulate(xi).to_physical(&map);
        Ok(combine(&self.cell_coefficients(mesh, cell), &tab))
    }

    pub fn eval(&self, mesh: &BackgroundMesh, cell: usize, xi: Point) -> f64 {
        let tab = ReferenceBasis::P2.tabulate(xi);
        let c = self.cell_coefficients(mesh, cell);
        (0..6).map(|i| c[i] * tab.values[i]).sum()
    }
}

/// `sum_i coeffs[i] * basis_i` as a jet, from a physical tabulation.
pub fn combine(coeffs: &[f64; 6], tab: &crate::basis::Tabulation) -> ScalarJet {
    let mut jet = ScalarJet::ZERO;
    for i in 0..tab.count {
        let c = coeffs[i];
        jet.value += c * tab.values[i];
        for a in 0..2 {
            jet.grad[a] += c * tab.grads[i][a];
            for b in 0..2 {
                jet.hess[a][b] += c * tab.hessians[i][a][b];
            }
        }
    }
    jet
}

/// Nodal P2 interpolant of `f` on the whole background mesh.
pub fn interpolate_p2(mesh: &BackgroundMesh, f: &impl ScalarFunction) -> ScalarP2Field {
    let values = (0..mesh.num_p2_nodes()).map(|k| f.eval(mesh.p2_node_coord(k))).collect();
    ScalarP2Field { values }
}

/// Nodal P2 interpolant of `x -> profile(|x - center|)`.
pub fn cutoff_field(mesh: &BackgroundMesh, profile: &CutoffProfile, center: Point) -> Result<ScalarP2Field> {
    let wall_distance = center[0].min(1.0 - center[0]).min(center[1]).min(1.0 - center[1]);
    if profile.r1 >= wall_distance {
        return Err(Error::CutoffTooWide { r1: profile.r1, wall_distance });
    }
    let radial = |p: Point| {
        let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
        profile.eval(sqrt(dx * dx + dy * dy))
    };
    Ok(interpolate_p2(mesh, &radial))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// The level set is positive at all three vertices.
    Discarded,
    /// Active, not touching the interface.
    Interior,
    /// Active with at least one vertex where the level set is non-negative.
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetKind {
    /// No adjacent active cell.
    Inactive,
    /// Side of an active cell on the outer boundary.
    Wall,
    /// Interior facet of the active mesh away from cut cells.
    Interior,
    /// Interior facet of the active mesh touching a cut cell.
    Ghost,
    /// Boundary of the active mesh inside the solid.
    InternalBoundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainClassification {
    cell_kind: Vec<CellKind>,
    facet_kind: Vec<FacetKind>,
    active_cells: Vec<usize>,
    cut_cells: Vec<usize>,
    ghost_facets: Vec<usize>,
    gh_facets: Vec<usize>,
    wall_facets: Vec<usize>,
    active_domain_area: f64,
}

impl DomainClassification {
    pub fn cell_kind(&self, cell: usize) -> CellKind {
        self.cell_kind[cell]
    }

    pub fn facet_kind(&self, facet: usize) -> FacetKind {
        self.facet_kind[facet]
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.cell_kind[cell] != CellKind::Discarded
    }

    pub fn is_cut(&self, cell: usize) -> bool {
        self.cell_kind[cell] == CellKind::Cut
    }

    pub fn active_cells(&self) -> &[usize] {
        &self.active_cells
    }

    pub fn cut_cells(&self) -> &[usize] {
        &self.cut_cells
    }

    pub fn discarded_count(&self) -> usize {
        self.cell_kind.len() - self.active_cells.len()
    }

    pub fn ghost_facets(&self) -> &[usize] {
        &self.ghost_facets
    }

    pub fn gh_facets(&self) -> &[usize] {
        &self.gh_facets
    }

    pub fn wall_facets(&self) -> &[usize] {
        &self.wall_facets
    }

    pub fn active_domain_area(&self) -> f64 {
        self.active_domain_area
    }
}

/// Classifies cells by the sign of `phi` at their vertices: a cell is active
/// if `phi <= 0` at some vertex, and cut if it is active and `phi >= 0` at
/// some vertex.
pub fn classify(mesh: &BackgroundMesh, phi: &impl ScalarFunction) -> Result<DomainClassification> {
    let vertex_phi: Vec<f64> = mesh.vertices().iter().map(|&p| phi.eval(p)).collect();
    let mut cell_kind = Vec::with_capacity(mesh.num_cells());
    let (mut active_cells, mut cut_cells) = (Vec::new(), Vec::new());
    let mut area = 0.0;
    for (c, tri) in mesh.cells().iter().enumerate() {
        let vals = tri.map(|v| vertex_phi[v]);
        let kind = if vals.iter().any(|&s| s <= 0.0) {
            active_cells.push(c);
            area += mesh.signed_area(c);
            if vals.iter().any(|&s| s >= 0.0) {
                cut_cells.push(c);
                CellKind::Cut
            } else {
                CellKind::Interior
            }
        } else {
            CellKind::Discarded
        };
        cell_kind.push(kind);
    }
    if active_cells.is_empty() {
        return Err(Error::EmptyActiveMesh);
    }

    let mut facet_kind = Vec::with_capacity(mesh.num_facets());
    let (mut ghost, mut gh, mut wall) = (Vec::new(), Vec::new(), Vec::new());
    for (f, facet) in mesh.facets().iter().enumerate() {
        let cells = facet.cells();
        let active = cells.iter().filter(|&&c| cell_kind[c] != CellKind::Discarded).count();
        let kind = match (cells.len(), active) {
            (_, 0) => {
                if facet.is_wall() {
                    // the wall would be part of the boundary inside the solid
                    return Err(Error::InterfaceTouchesWall(f));
                }
                FacetKind::Inactive
            }
            (1, 1) => FacetKind::Wall,
            (2, 1) => FacetKind::InternalBoundary,
            _ => {
                if cells.iter().any(|&c| cell_kind[c] == CellKind::Cut) {
                    FacetKind::Ghost
                } else {
                    FacetKind::Interior
                }
            }
        };
        match kind {
            FacetKind::Ghost => ghost.push(f),
            FacetKind::InternalBoundary => gh.push(f),
            FacetKind::Wall => wall.push(f),
            _ => {}
        }
        facet_kind.push(kind);
    }
    Ok(DomainClassification {
        cell_kind,
        facet_kind,
        active_cells,
        cut_cells,
        ghost_facets: ghost,
        gh_facets: gh,
        wall_facets: wall,
        active_domain_area: area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::triangle_rule;

    fn disk() -> LevelSet {
        LevelSet::new([0.5, 0.5], 0.21)
    }

    #[test]
    fn fluid_only_and_all_solid() {
        let mesh = BackgroundMesh::new(4).unwrap();
        let cls = classify(&mesh, &|_: Point| -1.0).unwrap();
        assert_eq!(cls.active_cells().len(), 32);
        assert!(cls.cut_cells().is_empty() && cls.gh_facets().is_empty() && cls.ghost_facets().is_empty());
        assert!((cls.active_domain_area() - 1.0).abs() < 1e-12);
        assert_eq!(classify(&mesh, &|_: Point| 1.0), Err(Error::EmptyActiveMesh));
    }

    #[test]
    fn golden_counts_n10() {
        // brute-force vertex-sign sweep in exact rational arithmetic
        let mesh = BackgroundMesh::new(10).unwrap();
        let cls = classify(&mesh, &disk()).unwrap();
        assert_eq!(cls.active_cells().len(), 188);
        assert_eq!(cls.cut_cells().len(), 30);
        assert_eq!(cls.discarded_count(), 12);
        assert_eq!(cls.ghost_facets().len(), 48);
        assert_eq!(cls.gh_facets().len(), 12);
        assert_eq!(cls.wall_facets().len(), 40);
    }

    #[test]
    fn gh_facets_have_positive_endpoints() {
        for n in [5, 10, 20] {
            let mesh = BackgroundMesh::new(n).unwrap();
            let phi = disk();
            let cls = classify(&mesh, &phi).unwrap();
            for &f in cls.gh_facets() {
                for v in mesh.facets()[f].vertices() {
                    assert!(phi.eval(mesh.vertices()[v]) > 0.0);
                }
            }
        }
    }

    #[test]
    fn level_set_interpolant_is_exact() {
        let mesh = BackgroundMesh::new(10).unwrap();
        let phi = disk();
        let phi_h = interpolate_p2(&mesh, &phi);
        let rule = triangle_rule(8).unwrap();
        for cell in 0..mesh.num_cells() {
            let map = mesh.cell_map(cell).unwrap();
            for (xi, _) in rule.iter() {
                let x = map.to_physical(xi);
                assert!((phi_h.eval(&mesh, cell, xi) - phi.eval(x)).abs() <= 1e-13);
            }
        }
        let one = interpolate_p2(&mesh, &|_: Point| 1.0);
        assert!(one.values().iter().all(|&v| v == 1.0));
    }

    /// Closed-form quintic `1 + f(r0, r1) / (r1 - r0)^5`, written out term by
    /// term.
    fn expanded_cutoff(r: f64, r0: f64, r1: f64) -> f64 {
        let f = -6.0 * r.powi(5) + 15.0 * (r0 + r1) * r.powi(4)
            - 10.0 * (r0 * r0 + 4.0 * r0 * r1 + r1 * r1) * r.powi(3)
            + 30.0 * r0 * r1 * (r0 + r1) * r * r
            - 30.0 * r0 * r0 * r1 * r1 * r
            + r0.powi(3) * (r0 * r0 - 5.0 * r1 * r0 + 10.0 * r1 * r1);
        1.0 + f / (r1 - r0).powi(5)
    }

    #[test]
    fn cutoff_matches_expanded_form() {
        let p = CutoffProfile::new(0.21, 0.45).unwrap();
        for k in 0..=50 {
            let r = 0.21 + 0.24 * k as f64 / 50.0;
            assert!((p.eval(r) - expanded_cutoff(r, 0.21, 0.45)).abs() < 1e-11, "r={r}");
        }
        // t = 0.375 at r = 0.3: 1 - (10 t^3 - 15 t^4 + 6 t^5)
        assert!((p.eval(0.3) - 0.72479248046875).abs() < 1e-14);
        assert!((p.eval(0.33) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cutoff_is_c2_and_bounded() {
        let p = CutoffProfile::new(0.21, 0.45).unwrap();
        for (r, v) in [(0.21, 1.0), (0.45, 0.0)] {
            assert!((p.derivative(r + 1e-12, 0) - v).abs() < 1e-9);
            assert!(p.derivative(r + 1e-12, 1).abs() < 1e-8);
            assert!(p.derivative(r - 1e-12, 1).abs() < 1e-8);
        }
        assert!(p.derivative(0.21 + 1e-9, 2).abs() < 1e-5);
        assert!(p.derivative(0.45 - 1e-9, 2).abs() < 1e-5);
        for k in 0..=100 {
            let v = p.eval(0.21 + 0.24 * k as f64 / 100.0);
            assert!((0.0..=1.0).contains(&v));
        }
        // finite-difference check of the derivative formula
        let r = 0.31;
        let fd = (p.eval(r + 1e-6) - p.eval(r - 1e-6)) / 2e-6;
        assert!((fd - p.derivative(r, 1)).abs() < 1e-6);
        assert!(CutoffProfile::new(0.3, 0.2).is_err());
    }

    #[test]
    fn cutoff_field_nodal_values() {
        let mesh = BackgroundMesh::new(10).unwrap();
        let profile = CutoffProfile::new(0.21, 0.45).unwrap();
        let chi = cutoff_field(&mesh, &profile, [0.5, 0.5]).unwrap();
        // vertex (5, 5) is the center
        assert_eq!(chi.values()[5 * 11 + 5], 1.0);
        assert_eq!(chi.values()[0], 0.0);
        for k in 0..mesh.num_p2_nodes() {
            let p = mesh.p2_node_coord(k);
            let r = sqrt((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2));
            if r <= 0.21 {
                assert_eq!(chi.values()[k], 1.0);
            }
            if r >= 0.45 {
                assert_eq!(chi.values()[k], 0.0);
            }
            if (r - 0.3).abs() < 1e-15 {
                assert!((chi.values()[k] - expanded_cutoff(0.3, 0.21, 0.45)).abs() < 1e-11);
            }
        }
        // a node at r = 0.3: vertex (0.8, 0.5)
        let v = 5 * 11 + 8;
        assert!((mesh.vertices()[v][0] - 0.8).abs() < 1e-15);
        assert!((chi.values()[v] - expanded_cutoff(0.3, 0.21, 0.45)).abs() < 1e-11);
        assert!(matches!(
            cutoff_field(&mesh, &CutoffProfile::new(0.21, 0.5).unwrap(), [0.5, 0.5]),
            Err(Error::CutoffTooWide { .. })
        ));
    }

    #[test]
    fn cutoff_midpoint_value() {
        let profile = CutoffProfile::new(0.21, 0.45).unwrap();
        let r = 0.5 * (0.21 + 0.45);
        assert!((profile.eval(r) - expanded_cutoff(r, 0.21, 0.45)).abs() < 1e-11);
    }
}
