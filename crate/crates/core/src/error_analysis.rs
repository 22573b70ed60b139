//! Manufactured solutions, evaluation of composite discrete fields, error
//! norms and convergence rates.

use alloc::vec;
use alloc::vec::Vec;

use alloc::sync::Arc;

use crate::assembly::{boundary_jet, BoundaryData, Discretization, Layout};
use crate::basis::ReferenceBasis;
use crate::geometry::{combine, ScalarP2Field};
use crate::math::{cos, divergence, ln, pairwise_sum_columns, sin, sqrt, Mat2, Point, ScalarJet, VectorJet, PI};
use crate::quadrature::triangle_rule;
use crate::{Error, Result};

/// Closed-form velocity and pressure fields.
pub trait ExactSolution {
    fn velocity(&self, x: Point) -> [f64; 2];
    /// `grad[c][d] = d u_c / d x_d`.
    fn velocity_gradient(&self, x: Point) -> Mat2;
    fn pressure(&self, x: Point) -> f64;
}

/// `u = (cos(pi x) sin(pi y), -sin(pi x) cos(pi y))`,
/// `p = (y - 1/2) cos(2 pi x) + (x - 1/2) sin(2 pi y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedStokes {
    pub nu: f64,
}

impl ManufacturedStokes {
    pub fn pressure_gradient(&self, x: Point) -> [f64; 2] {
        let [x, y] = x;
        [
            -2.0 * PI * (y - 0.5) * sin(2.0 * PI * x) + sin(2.0 * PI * y),
            cos(2.0 * PI * x) + 2.0 * PI * (x - 0.5) * cos(2.0 * PI * y),
        ]
    }

    /// `-2 nu div D(u) + grad p`, which equals `2 pi^2 nu u + grad p` since
    /// `u` is divergence free with `-Lap u = 2 pi^2 u`.
    pub fn forcing(&self, x: Point) -> [f64; 2] {
        let u = self.velocity(x);
        let gp = self.pressure_gradient(x);
        let k = 2.0 * PI * PI * self.nu;
        [k * u[0] + gp[0], k * u[1] + gp[1]]
    }
}

impl BoundaryData for ManufacturedStokes {
    fn jet(&self, x: Point) -> VectorJet {
        let (sx, cx) = (sin(PI * x[0]), cos(PI * x[0]));
        let (sy, cy) = (sin(PI * x[1]), cos(PI * x[1]));
        let k = PI * PI;
        [
            ScalarJet {
                value: cx * sy,
                grad: [-PI * sx * sy, PI * cx * cy],
                hess: [[-k * cx * sy, -k * sx * cy], [-k * sx * cy, -k * cx * sy]],
            },
            ScalarJet {
                value: -sx * cy,
                grad: [-PI * cx * cy, PI * sx * sy],
                hess: [[k * sx * cy, k * cx * sy], [k * cx * sy, k * sx * cy]],
            },
        ]
    }
}

impl ExactSolution for ManufacturedStokes {
    fn velocity(&self, x: Point) -> [f64; 2] {
        let (sx, cx) = (sin(PI * x[0]), cos(PI * x[0]));
        let (sy, cy) = (sin(PI * x[1]), cos(PI * x[1]));
        [cx * sy, -sx * cy]
    }

    fn velocity_gradient(&self, x: Point) -> Mat2 {
        let (sx, cx) = (sin(PI * x[0]), cos(PI * x[0]));
        let (sy, cy) = (sin(PI * x[1]), cos(PI * x[1]));
        [[-PI * sx * sy, PI * cx * cy], [-PI * cx * cy, PI * sx * sy]]
    }

    fn pressure(&self, x: Point) -> f64 {
        (x[1] - 0.5) * cos(2.0 * PI * x[0]) + (x[0] - 0.5) * sin(2.0 * PI * x[1])
    }
}

/// `u = A x` with zero pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFlow {
    pub matrix: Mat2,
}

impl BoundaryData for LinearFlow {
    fn jet(&self, x: Point) -> VectorJet {
        let u = self.velocity(x);
        let a = &self.matrix;
        [ScalarJet::affine(u[0], a[0]), ScalarJet::affine(u[1], a[1])]
    }
}

impl ExactSolution for LinearFlow {
    fn velocity(&self, x: Point) -> [f64; 2] {
        let a = &self.matrix;
        [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
    }

    fn velocity_gradient(&self, _: Point) -> Mat2 {
        self.matrix
    }

    fn pressure(&self, _: Point) -> f64 {
        0.0
    }
}

/// Velocity value and gradient plus pressure at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointValue {
    pub velocity: [f64; 2],
    pub gradient: Mat2,
    pub pressure: f64,
}

/// A solved system in field form:
/// `u_h = u_D,h + phi_h w_h + chi_h (U + psi (-r_y, r_x))`, `p_h` in P1.
#[derive(Debug, Clone)]
pub struct CompositeSolution {
    layout: Layout,
    w: [ScalarP2Field; 2],
    pressure: Vec<f64>,
    rigid: Option<[f64; 3]>,
    multiplier: f64,
    lift: Option<Arc<dyn BoundaryData>>,
}

impl CompositeSolution {
    /// Scatters a solution vector of `layout` back onto mesh nodes.
    pub fn new(disc: &Discretization, layout: Layout, x: &[f64], lift: Option<Arc<dyn BoundaryData>>) -> Result<Self> {
        if x.len() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), found: x.len() });
        }
        let mesh = disc.mesh();
        let (vel, pre) = (disc.velocity_dofs(), disc.pressure_dofs());
        if vel.free_dofs() != layout.velocity || pre.free_dofs() != layout.pressure {
            return Err(Error::DimensionMismatch {
                expected: vel.free_dofs() + pre.free_dofs(),
                found: layout.velocity + layout.pressure,
            });
        }
        let mut w = [vec![0.0; mesh.num_p2_nodes()], vec![0.0; mesh.num_p2_nodes()]];
        for node in 0..mesh.num_p2_nodes() {
            for (c, wc) in w.iter_mut().enumerate() {
                if let Some(k) = vel.dof(node, c) {
                    wc[node] = x[k];
                }
            }
        }
        let off = layout.pressure_offset();
        let pressure = (0..mesh.num_vertices())
            .map(|v| pre.dof(v, 0).map_or(0.0, |k| x[off + k]))
            .collect();
        let rigid = layout.rigid_offset().map(|o| [x[o], x[o + 1], x[o + 2]]);
        if rigid.is_some() && disc.chi().is_none() {
            return Err(Error::InvalidCutoff { r0: disc.level_set().radius, r1: f64::NAN });
        }
        let [wx, wy] = w;
        Ok(CompositeSolution {
            layout,
            w: [ScalarP2Field::from_values(wx), ScalarP2Field::from_values(wy)],
            pressure,
            rigid,
            multiplier: x[layout.multiplier()],
            lift,
        })
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// `(U_x, U_y)`, for the particle problem.
    pub fn particle_velocity(&self) -> Option<[f64; 2]> {
        self.rigid.map(|r| [r[0], r[1]])
    }

    /// Angular velocity `psi`, for the particle problem.
    pub fn rotation(&self) -> Option<f64> {
        self.rigid.map(|r| r[2])
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn vertex_pressure(&self) -> &[f64] {
        &self.pressure
    }

    fn check_active(disc: &Discretization, cell: usize) -> Result<()> {
        if cell < disc.mesh().num_cells() && disc.classification().is_active(cell) {
            Ok(())
        } else {
            Err(Error::InactiveCell(cell))
        }
    }

    /// Velocity jet on an active cell at reference point `xi`.
    pub fn velocity_jet(&self, disc: &Discretization, cell: usize, xi: Point) -> Result<VectorJet> {
        Self::check_active(disc, cell)?;
        let mesh = disc.mesh();
        let map = mesh.cell_map(cell)?;
        let tab = ReferenceBasis::P2.tabulate(xi).to_physical(&map);
        let phi = combine(&disc.phi().cell_coefficients(mesh, cell), &tab);
        let mut u = [0, 1].map(|c| phi.mul(&combine(&self.w[c].cell_coefficients(mesh, cell), &tab)));
        if let Some(lift) = &self.lift {
            let g = boundary_jet(lift.as_ref(), map.to_physical(xi))?;
            for c in 0..2 {
                u[c].add_scaled(&g[c], 1.0);
            }
        }
        if let (Some([ux, uy, psi]), Some(chi)) = (self.rigid, disc.chi()) {
            let chi = combine(&chi.cell_coefficients(mesh, cell), &tab);
            let x = map.to_physical(xi);
            let c = disc.level_set().center;
            let (rx, ry) = (x[0] - c[0], x[1] - c[1]);
            let vx = ScalarJet::affine(ux - psi * ry, [0.0, -psi]);
            let vy = ScalarJet::affine(uy + psi * rx, [psi, 0.0]);
            u[0].add_scaled(&chi.mul(&vx), 1.0);
            u[1].add_scaled(&chi.mul(&vy), 1.0);
        }
        Ok(u)
    }

    pub fn pressure(&self, disc: &Discretization, cell: usize, xi: Point) -> Result<f64> {
        Self::check_active(disc, cell)?;
        let tab = ReferenceBasis::P1.tabulate(xi);
        let v = disc.mesh().cells()[cell];
        Ok((0..3).map(|k| tab.values[k] * self.pressure[v[k]]).sum())
    }

    /// Velocity, velocity gradient and pressure at physical point `x` of an
    /// active cell.
    pub fn eval(&self, disc: &Discretization, cell: usize, x: Point) -> Result<PointValue> {
        Self::check_active(disc, cell)?;
        let xi = disc.mesh().cell_map(cell)?.to_reference(x);
        let u = self.velocity_jet(disc, cell, xi)?;
        Ok(PointValue {
            velocity: [u[0].value, u[1].value],
            gradient: [u[0].grad, u[1].grad],
            pressure: self.pressure(disc, cell, xi)?,
        })
    }

    /// `int_{Omega_h} p_h`.
    pub fn pressure_integral(&self, disc: &Discretization) -> f64 {
        let mesh = disc.mesh();
        let rows: Vec<[f64; 1]> = disc
            .classification()
            .active_cells()
            .iter()
            .map(|&c| {
                let v = mesh.cells()[c];
                [mesh.signed_area(c) * (self.pressure[v[0]] + self.pressure[v[1]] + self.pressure[v[2]]) / 3.0]
            })
            .collect();
        pairwise_sum_columns(&rows)[0]
    }
}

/// Absolute errors and reference norms over a measurement domain. Pressures
/// are compared after subtracting their means over that domain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub u_l2: f64,
    /// Full H1 norm (value and gradient).
    pub u_h1: f64,
    pub p_l2: f64,
    pub ref_u_l2: f64,
    pub ref_u_h1: f64,
    pub ref_p_l2: f64,
    /// `|| div u_h ||_0` of the discrete field.
    pub div_l2: f64,
    /// Measure of the domain.
    pub area: f64,
}

impl ErrorNorms {
    pub fn u_l2_rel(&self) -> f64 {
        self.u_l2 / self.ref_u_l2
    }

    pub fn u_h1_rel(&self) -> f64 {
        self.u_h1 / self.ref_u_h1
    }

    pub fn p_l2_rel(&self) -> f64 {
        self.p_l2 / self.ref_p_l2
    }
}

/// One quadrature sample: weight, discrete values, reference values.
type Sample = (f64, PointValue, PointValue, f64);

/// Two-pass accumulation: pressure means first, then the squared errors.
/// `samples(k)` yields the quadrature samples of measurement item `k`.
fn accumulate(items: usize, samples: &dyn Fn(usize) -> Result<Vec<Sample>>) -> Result<ErrorNorms> {
    if items == 0 {
        return Err(Error::EmptyMeasurementDomain);
    }
    let mut first = Vec::with_capacity(items);
    for k in 0..items {
        let mut row = [0.0; 3];
        for (w, a, r, _) in samples(k)? {
            row[0] += w;
            row[1] += w * a.pressure;
            row[2] += w * r.pressure;
        }
        first.push(row);
    }
    let [area, pa, pr] = pairwise_sum_columns(&first);
    let (mean_a, mean_r) = (pa / area, pr / area);
    let mut second = Vec::with_capacity(items);
    for k in 0..items {
        let mut row = [0.0; 7];
        for (w, a, r, div) in samples(k)? {
            for c in 0..2 {
                let e = a.velocity[c] - r.velocity[c];
                row[0] += w * e * e;
                row[1] += w * r.velocity[c] * r.velocity[c];
                for d in 0..2 {
                    let g = a.gradient[c][d] - r.gradient[c][d];
                    row[2] += w * g * g;
                    row[3] += w * r.gradient[c][d] * r.gradient[c][d];
                }
            }
            let (qa, qr) = (a.pressure - mean_a, r.pressure - mean_r);
            row[4] += w * (qa - qr) * (qa - qr);
            row[5] += w * qr * qr;
            row[6] += w * div * div;
        }
        second.push(row);
    }
    let s = pairwise_sum_columns(&second);
    Ok(ErrorNorms {
        u_l2: sqrt(s[0]),
        u_h1: sqrt(s[0] + s[2]),
        p_l2: sqrt(s[4]),
        ref_u_l2: sqrt(s[1]),
        ref_u_h1: sqrt(s[1] + s[3]),
        ref_p_l2: sqrt(s[5]),
        div_l2: sqrt(s[6]),
        area,
    })
}

/// Errors of `solution` against closed-form fields over all active cells.
pub fn error_norms(disc: &Discretization, solution: &CompositeSolution, exact: &dyn ExactSolution) -> Result<ErrorNorms> {
    let rule = triangle_rule(8)?;
    let cells = disc.classification().active_cells();
    let samples = |k: usize| -> Result<Vec<Sample>> {
        let cell = cells[k];
        let map = disc.mesh().cell_map(cell)?;
        rule.iter()
            .map(|(xi, w)| {
                let x = map.to_physical(xi);
                let u = solution.velocity_jet(disc, cell, xi)?;
                let approx = PointValue {
                    velocity: [u[0].value, u[1].value],
                    gradient: [u[0].grad, u[1].grad],
                    pressure: solution.pressure(disc, cell, xi)?,
                };
                let reference = PointValue {
                    velocity: exact.velocity(x),
                    gradient: exact.velocity_gradient(x),
                    pressure: exact.pressure(x),
                };
                Ok((w * map.det.abs(), approx, reference, divergence(&u)))
            })
            .collect()
    };
    accumulate(cells.len(), &samples)
}

/// Cells of the `fine_n` mesh covering cell `coarse_cell` of the `coarse_n`
/// mesh (both with the same diagonal direction).
pub fn fine_subcells(coarse_n: usize, fine_n: usize, coarse_cell: usize) -> Result<Vec<usize>> {
    if coarse_n == 0 || fine_n % coarse_n != 0 {
        return Err(Error::NotNested { coarse: coarse_n, fine: fine_n });
    }
    let r = fine_n / coarse_n;
    let k = coarse_cell / 2;
    let (i, j) = (k % coarse_n, k / coarse_n);
    let lower = coarse_cell % 2 == 0;
    let mut out = Vec::with_capacity(r * r);
    for b in 0..r {
        for a in 0..r {
            let fk = (j * r + b) * fine_n + (i * r + a);
            let inside = if lower { b < a } else { b > a };
            if inside {
                out.push(2 * fk);
                out.push(2 * fk + 1);
            } else if a == b {
                out.push(2 * fk + if lower { 0 } else { 1 });
            }
        }
    }
    Ok(out)
}

/// Errors of a coarse solution against a reference solution on a nested
/// finer mesh, plus the particle velocity and rotation errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelfConvergence {
    pub norms: ErrorNorms,
    /// `|U - U_ref| / |U_ref|`
    pub particle_velocity_rel: f64,
    /// `|psi - psi_ref|`
    pub rotation_abs: f64,
    /// Number of coarse cells in the measurement domain.
    pub cells: usize,
}

/// Compares `coarse` with `reference` over the coarse active cells whose
/// fine sub-cells are all active in the reference discretization. The
/// integrals run over those fine sub-cells, so both fields are polynomial on
/// every integration cell.
pub fn self_convergence(
    coarse_disc: &Discretization,
    coarse: &CompositeSolution,
    fine_disc: &Discretization,
    reference: &CompositeSolution,
) -> Result<SelfConvergence> {
    let (nc, nf) = (coarse_disc.mesh().n(), fine_disc.mesh().n());
    let fine_cls = fine_disc.classification();
    let mut measured: Vec<(usize, Vec<usize>)> = Vec::new();
    for &c in coarse_disc.classification().active_cells() {
        let subs = fine_subcells(nc, nf, c)?;
        if subs.iter().all(|&f| fine_cls.is_active(f)) {
            measured.push((c, subs));
        }
    }
    let rule = triangle_rule(8)?;
    let coarse_mesh = coarse_disc.mesh();
    let samples = |k: usize| -> Result<Vec<Sample>> {
        let (c, subs) = &measured[k];
        let cmap = coarse_mesh.cell_map(*c)?;
        let mut out = Vec::with_capacity(subs.len() * rule.len());
        for &f in subs {
            let fmap = fine_disc.mesh().cell_map(f)?;
            for (xi, w) in rule.iter() {
                let x = fmap.to_physical(xi);
                let u = coarse.velocity_jet(coarse_disc, *c, cmap.to_reference(x))?;
                let approx = PointValue {
                    velocity: [u[0].value, u[1].value],
                    gradient: [u[0].grad, u[1].grad],
                    pressure: coarse.pressure(coarse_disc, *c, cmap.to_reference(x))?,
                };
                let r = reference.velocity_jet(fine_disc, f, xi)?;
                let refv = PointValue {
                    velocity: [r[0].value, r[1].value],
                    gradient: [r[0].grad, r[1].grad],
                    pressure: reference.pressure(fine_disc, f, xi)?,
                };
                out.push((w * fmap.det.abs(), approx, refv, divergence(&u)));
            }
        }
        Ok(out)
    };
    let norms = accumulate(measured.len(), &samples)?;
    let (mut particle_velocity_rel, mut rotation_abs) = (0.0, 0.0);
    if let (Some(u), Some(ur)) = (coarse.particle_velocity(), reference.particle_velocity()) {
        let d = sqrt((u[0] - ur[0]) * (u[0] - ur[0]) + (u[1] - ur[1]) * (u[1] - ur[1]));
        let m = sqrt(ur[0] * ur[0] + ur[1] * ur[1]);
        particle_velocity_rel = if m > 0.0 { d / m } else { d };
    }
    if let (Some(p), Some(pr)) = (coarse.rotation(), reference.rotation()) {
        rotation_abs = (p - pr).abs();
    }
    Ok(SelfConvergence { norms, particle_velocity_rel, rotation_abs, cells: measured.len() })
}

/// Experimental orders `ln(e_i / e_{i+1}) / ln(h_i / h_{i+1})`.
pub fn eoc(h: &[f64], errors: &[f64]) -> Result<Vec<f64>> {
    if h.len() != errors.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), found: errors.len() });
    }
    if errors.len() < 2 {
        return Err(Error::TooFewRows);
    }
    if let Some(&e) = errors.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::NonPositiveError(e));
    }
    Ok((0..errors.len() - 1)
        .map(|i| ln(errors[i] / errors[i + 1]) / ln(h[i] / h[i + 1]))
        .collect())
}

/// One refinement level of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub err_u_l2: f64,
    pub err_u_h1: f64,
    pub err_p_l2: f64,
    /// `(|U - U_ref| / |U_ref|, |psi - psi_ref|)` for particle studies.
    pub rigid: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn h(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h).collect()
    }

    fn column(&self, f: impl Fn(&ConvergenceRow) -> f64) -> Result<Vec<f64>> {
        eoc(&self.h(), &self.rows.iter().map(f).collect::<Vec<_>>())
    }

    pub fn eoc_u_l2(&self) -> Result<Vec<f64>> {
        self.column(|r| r.err_u_l2)
    }

    pub fn eoc_u_h1(&self) -> Result<Vec<f64>> {
        self.column(|r| r.err_u_h1)
    }

    pub fn eoc_p_l2(&self) -> Result<Vec<f64>> {
        self.column(|r| r.err_p_l2)
    }

    pub fn eoc_particle_velocity(&self) -> Result<Vec<f64>> {
        self.column(|r| r.rigid.map_or(f64::NAN, |x| x.0))
    }
}
