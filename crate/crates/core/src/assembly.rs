//! Assembly of the stabilized Stokes and particle systems.
//!
//! Velocities are composite: `u_D,h + phi_h w_h` for the Stokes problem and
//! `phi_h w_h + chi_h (U + psi (-r_y, r_x))` for the particle problem. For
//! trial `(u, p)` and test `(v, q)` the bilinear form is
//!
//! ```text
//!   2 nu (D u, D v) - (p, div v) - (q, div u)                    active cells
//! + sigma h^2 (-nu Lap u + grad p, -nu Lap v - grad q)
//! + sigma (div u, div v)                                          cut cells
//! - <(2 nu D u - p I) n, phi_h s>                                 G_h facets
//! + sigma_u (|E| <[d_n u], [d_n v]> + |E|^3 <[d_nn u], [d_nn v]>)  ghost facets
//! ```
//!
//! plus a multiplier enforcing a zero pressure mean on the active domain.
//! Matrix rows are tests, columns trials. The Dirichlet data `u_D` is
//! evaluated pointwise with its derivatives and treated as a trial function
//! with coefficient one whose column is moved to the right-hand side.
//!
//! Assembly is split into independent work items (cells, then facets, then
//! one global item) so that callers can evaluate them in parallel and
//! concatenate the results in item order.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use crate::basis::{DofMap, ReferenceBasis, SpaceKind, Tabulation};
use crate::geometry::{classify, combine, cutoff_field, interpolate_p2, CutoffProfile, FacetKind, LevelSet, ScalarP2Field};
use crate::geometry::DomainClassification;
use crate::math::{divergence, dot, quad_form, strain, ddot, Point, ScalarJet, VectorJet, PI, ZERO_VECTOR_JET};
use crate::mesh::{BackgroundMesh, CellMap};
use crate::quadrature::{segment_rule, triangle_rule, QuadratureRule};
use crate::sparse::{CsrMatrix, Triplet};
use crate::{Error, Result};

/// A vector field on the plane, e.g. a forcing term.
pub type VectorFunction<'a> = &'a (dyn Fn(Point) -> [f64; 2] + Sync);

/// Dirichlet velocity with first and second derivatives.
pub trait BoundaryData: Debug + Send + Sync {
    fn jet(&self, x: Point) -> VectorJet;
}

/// Mesh, geometry and finite element spaces shared by assembly and
/// post-processing.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: BackgroundMesh,
    level_set: LevelSet,
    classification: DomainClassification,
    phi: ScalarP2Field,
    chi: Option<ScalarP2Field>,
    velocity: DofMap,
    pressure: DofMap,
}

impl Discretization {
    /// Classifies the mesh against `level_set` and builds the spaces. The
    /// cut-off is only needed for the particle problem.
    pub fn new(mesh: BackgroundMesh, level_set: LevelSet, cutoff: Option<CutoffProfile>) -> Result<Self> {
        let classification = classify(&mesh, &level_set)?;
        let phi = interpolate_p2(&mesh, &level_set);
        let chi = match cutoff {
            Some(profile) => Some(cutoff_field(&mesh, &profile, level_set.center)?),
            None => None,
        };
        let velocity = DofMap::new(&mesh, &classification, SpaceKind::VectorP2);
        let pressure = DofMap::new(&mesh, &classification, SpaceKind::ScalarP1);
        Ok(Discretization { mesh, level_set, classification, phi, chi, velocity, pressure })
    }

    pub fn mesh(&self) -> &BackgroundMesh {
        &self.mesh
    }

    pub fn level_set(&self) -> &LevelSet {
        &self.level_set
    }

    pub fn classification(&self) -> &DomainClassification {
        &self.classification
    }

    pub fn phi(&self) -> &ScalarP2Field {
        &self.phi
    }

    pub fn chi(&self) -> Option<&ScalarP2Field> {
        self.chi.as_ref()
    }

    pub fn velocity_dofs(&self) -> &DofMap {
        &self.velocity
    }

    pub fn pressure_dofs(&self) -> &DofMap {
        &self.pressure
    }
}

/// Position of each block in the unknown vector:
/// `[w (x comps, y comps) | p | U_x, U_y, psi | lambda]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub velocity: usize,
    pub pressure: usize,
    pub rigid: bool,
}

impl Layout {
    pub fn pressure_offset(&self) -> usize {
        self.velocity
    }

    pub fn rigid_offset(&self) -> Option<usize> {
        self.rigid.then_some(self.velocity + self.pressure)
    }

    pub fn multiplier(&self) -> usize {
        self.velocity + self.pressure + if self.rigid { 3 } else { 0 }
    }

    pub fn dim(&self) -> usize {
        self.multiplier() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stabilization {
    pub sigma: f64,
    pub sigma_u: f64,
}

impl Default for Stabilization {
    fn default() -> Self {
        Stabilization { sigma: 20.0, sigma_u: 20.0 }
    }
}

/// Data of the Stokes problem with Dirichlet velocity `boundary` on both
/// the interface and the outer wall.
#[derive(Clone)]
pub struct StokesData<'a> {
    pub nu: f64,
    pub stabilization: Stabilization,
    pub forcing: VectorFunction<'a>,
    pub boundary: Arc<dyn BoundaryData>,
}

/// Data of the particle problem. The particle is the disk of the level set;
/// its mass is `rho_s * pi * R^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleData {
    pub nu: f64,
    pub rho_f: f64,
    pub rho_s: f64,
    pub gravity: [f64; 2],
    pub stabilization: Stabilization,
}

impl Default for ParticleData {
    fn default() -> Self {
        ParticleData {
            nu: 1.0,
            rho_f: 1.0,
            rho_s: 2.0,
            gravity: [0.0, -10.0],
            stabilization: Stabilization::default(),
        }
    }
}

impl ParticleData {
    pub fn mass(&self, radius: f64) -> f64 {
        self.rho_s * PI * radius * radius
    }
}

/// Triplets and right-hand-side entries produced by one work item.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Contribution {
    pub triplets: Vec<Triplet>,
    pub rhs: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    pub layout: Layout,
    pub triplets: Vec<Triplet>,
    pub rhs: Vec<f64>,
}

impl AssembledSystem {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn matrix(&self) -> Result<CsrMatrix> {
        CsrMatrix::compress(self.dim(), &self.triplets)
    }
}

#[derive(Clone, Copy)]
enum Source<'a> {
    Field(VectorFunction<'a>),
    Constant([f64; 2]),
}

#[derive(Debug, Clone, Copy)]
struct Rigid {
    offset: usize,
    /// `rho_f g`
    weight: [f64; 2],
    /// `(1 - rho_f / rho_s) m g`
    buoyancy: [f64; 2],
}

/// Shape of a local composite velocity function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    /// `phi_h N_node e_comp`
    Phi { node: u8, comp: u8 },
    /// `chi_h e_x`, `chi_h e_y`, `chi_h (-r_y, r_x)`
    Rigid(u8),
    Lift,
}

/// Where a local function goes: a global unknown or the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Unknown(usize),
    Lift,
}

/// Everything needed to evaluate composite functions at one point of a cell.
struct PointData {
    x: Point,
    p2: Tabulation,
    p1: Tabulation,
    phi: ScalarJet,
    chi: ScalarJet,
    lift: VectorJet,
}

/// Per-function quantities used by the volume terms.
#[derive(Clone, Copy, Default)]
struct Eval {
    value: [f64; 2],
    strain: [[f64; 2]; 2],
    div: f64,
    lap: [f64; 2],
}

impl Eval {
    fn from_jet(u: &VectorJet) -> Self {
        Eval {
            value: [u[0].value, u[1].value],
            strain: strain(u),
            div: divergence(u),
            lap: [u[0].laplacian(), u[1].laplacian()],
        }
    }
}

/// Work-item driver for one system. Items `0..num_cells` are cells, the
/// next `num_facets` are facets, and the last one is global.
pub struct Assembler<'a> {
    disc: &'a Discretization,
    nu: f64,
    stab: Stabilization,
    source: Source<'a>,
    lift: Option<Arc<dyn BoundaryData>>,
    rigid: Option<Rigid>,
    layout: Layout,
    volume: QuadratureRule,
    segment: QuadratureRule,
}

fn check_parameter(name: &'static str, value: f64, positive: bool) -> Result<()> {
    let ok = value.is_finite() && if positive { value > 0.0 } else { value >= 0.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}

impl<'a> Assembler<'a> {
    fn base(disc: &'a Discretization, nu: f64, stab: Stabilization, source: Source<'a>, rigid: bool) -> Result<Self> {
        check_parameter("nu", nu, true)?;
        check_parameter("sigma", stab.sigma, false)?;
        check_parameter("sigma_u", stab.sigma_u, false)?;
        if disc.classification.cut_cells().is_empty() {
            return Err(Error::NoCutCells);
        }
        let layout = Layout {
            velocity: disc.velocity.free_dofs(),
            pressure: disc.pressure.free_dofs(),
            rigid,
        };
        Ok(Assembler {
            disc,
            nu,
            stab,
            source,
            lift: None,
            rigid: None,
            layout,
            volume: triangle_rule(8)?,
            segment: segment_rule(),
        })
    }

    pub fn stokes(disc: &'a Discretization, data: &StokesData<'a>) -> Result<Self> {
        let mut asm = Self::base(disc, data.nu, data.stabilization, Source::Field(data.forcing), false)?;
        asm.lift = Some(data.boundary.clone());
        Ok(asm)
    }

    pub fn particulate(disc: &'a Discretization, data: &ParticleData) -> Result<Self> {
        check_parameter("rho_f", data.rho_f, false)?;
        check_parameter("rho_s", data.rho_s, true)?;
        if let Some(&g) = data.gravity.iter().find(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter { name: "gravity", value: g });
        }
        if disc.chi.is_none() {
            return Err(Error::InvalidCutoff { r0: disc.level_set.radius, r1: f64::NAN });
        }
        let weight = [data.rho_f * data.gravity[0], data.rho_f * data.gravity[1]];
        let mut asm = Self::base(disc, data.nu, data.stabilization, Source::Constant(weight), true)?;
        let factor = (1.0 - data.rho_f / data.rho_s) * data.mass(disc.level_set.radius);
        asm.rigid = Some(Rigid {
            offset: asm.layout.rigid_offset().expect("rigid layout"),
            weight,
            buoyancy: [factor * data.gravity[0], factor * data.gravity[1]],
        });
        Ok(asm)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Dirichlet data, for the Stokes problem.
    pub fn lift(&self) -> Option<&Arc<dyn BoundaryData>> {
        self.lift.as_ref()
    }

    pub fn num_items(&self) -> usize {
        self.disc.mesh.num_cells() + self.disc.mesh.num_facets() + 1
    }

    pub fn item(&self, k: usize) -> Result<Contribution> {
        let mut out = Contribution::default();
        let (nc, nf) = (self.disc.mesh.num_cells(), self.disc.mesh.num_facets());
        if k < nc {
            self.cell(k, &mut out)?;
        } else if k < nc + nf {
            let f = k - nc;
            match self.disc.classification.facet_kind(f) {
                FacetKind::Ghost if self.stab.sigma_u != 0.0 => self.ghost_facet(f, &mut out)?,
                FacetKind::InternalBoundary => self.gh_facet(f, &mut out)?,
                _ => {}
            }
        } else if let Some(rigid) = self.rigid {
            out.rhs.push((rigid.offset, rigid.buoyancy[0]));
            out.rhs.push((rigid.offset + 1, rigid.buoyancy[1]));
        }
        Ok(out)
    }

    /// Concatenates item contributions, in the order given.
    pub fn finish(&self, parts: impl IntoIterator<Item = Contribution>) -> AssembledSystem {
        let mut triplets = Vec::new();
        let mut rhs = vec![0.0; self.layout.dim()];
        for part in parts {
            triplets.extend_from_slice(&part.triplets);
            for (i, v) in part.rhs {
                rhs[i] += v;
            }
        }
        AssembledSystem { layout: self.layout, triplets, rhs }
    }

    /// Serial assembly over all items.
    pub fn assemble(&self) -> Result<AssembledSystem> {
        let parts = (0..self.num_items()).map(|k| self.item(k)).collect::<Result<Vec<_>>>()?;
        Ok(self.finish(parts))
    }

    fn point_data(&self, cell: usize, map: &CellMap, xi: Point) -> Result<PointData> {
        let disc = self.disc;
        let p2 = ReferenceBasis::P2.tabulate(xi).to_physical(map);
        let p1 = ReferenceBasis::P1.tabulate(xi).to_physical(map);
        let phi = combine(&disc.phi.cell_coefficients(&disc.mesh, cell), &p2);
        let chi = match (&disc.chi, self.rigid) {
            (Some(chi), Some(_)) => combine(&chi.cell_coefficients(&disc.mesh, cell), &p2),
            _ => ScalarJet::ZERO,
        };
        let x = map.to_physical(xi);
        let lift = match &self.lift {
            Some(data) => boundary_jet(data.as_ref(), x)?,
            None => ZERO_VECTOR_JET,
        };
        Ok(PointData { x, p2, p1, phi, chi, lift })
    }

    fn shape_jet(&self, shape: Shape, pd: &PointData) -> VectorJet {
        match shape {
            Shape::Phi { node, comp } => {
                let i = node as usize;
                let n = ScalarJet { value: pd.p2.values[i], grad: pd.p2.grads[i], hess: pd.p2.hessians[i] };
                let mut u = ZERO_VECTOR_JET;
                u[comp as usize] = pd.phi.mul(&n);
                u
            }
            Shape::Rigid(k) => {
                let c = self.disc.level_set.center;
                rigid_jet(k, &pd.chi, [pd.x[0] - c[0], pd.x[1] - c[1]])
            }
            Shape::Lift => pd.lift,
        }
    }

    fn source_at(&self, x: Point) -> Result<[f64; 2]> {
        let f = match self.source {
            Source::Field(f) => f(x),
            Source::Constant(f) => f,
        };
        if f[0].is_finite() && f[1].is_finite() {
            Ok(f)
        } else {
            Err(Error::NonFiniteData { x: x[0], y: x[1] })
        }
    }

    /// Local composite velocity functions of a cell with their slots.
    fn cell_shapes(&self, cell: usize) -> Vec<(Shape, Slot)> {
        let mesh = &self.disc.mesh;
        let nodes = mesh.cell_p2_nodes(cell);
        let mut shapes = Vec::with_capacity(16);
        for comp in 0..2u8 {
            for (i, &node) in nodes.iter().enumerate() {
                if let Some(g) = self.disc.velocity.dof(node, comp as usize) {
                    shapes.push((Shape::Phi { node: i as u8, comp }, Slot::Unknown(g)));
                }
            }
        }
        if let Some(rigid) = self.rigid {
            for k in 0..3u8 {
                shapes.push((Shape::Rigid(k), Slot::Unknown(rigid.offset + k as usize)));
            }
        }
        if self.lift.is_some() {
            shapes.push((Shape::Lift, Slot::Lift));
        }
        shapes
    }

    fn pressure_slots(&self, cell: usize) -> [usize; 3] {
        let off = self.layout.pressure_offset();
        let v = self.disc.mesh.cells()[cell];
        v.map(|node| off + self.disc.pressure.dof(node, 0).expect("vertices of active cells carry pressure"))
    }

    fn cell(&self, cell: usize, out: &mut Contribution) -> Result<()> {
        let disc = self.disc;
        let map = disc.mesh.cell_map(cell)?;
        let dx_scale = map.det.abs();
        if !disc.classification.is_active(cell) {
            if let Some(rigid) = self.rigid {
                // fluid weight over the whole box, tested by rigid motions
                let mut acc = [0.0; 3];
                for (xi, w) in self.volume.iter() {
                    let pd = self.point_data(cell, &map, xi)?;
                    for (k, a) in acc.iter_mut().enumerate() {
                        let v = self.shape_jet(Shape::Rigid(k as u8), &pd);
                        *a += w * dx_scale * (rigid.weight[0] * v[0].value + rigid.weight[1] * v[1].value);
                    }
                }
                out.rhs.extend(acc.iter().enumerate().map(|(k, &a)| (rigid.offset + k, a)));
            }
            return Ok(());
        }

        let cut = disc.classification.is_cut(cell);
        let h2 = disc.mesh.h() * disc.mesh.h();
        let (nu, sigma) = (self.nu, self.stab.sigma);
        let ls = sigma * h2;
        let shapes = self.cell_shapes(cell);
        let nv = shapes.len();
        let pslots = self.pressure_slots(cell);
        let m = nv + 3;
        // local[test * m + trial]; pressure functions are at nv..nv+3
        let mut local = vec![0.0; m * m];
        let mut local_rhs = vec![0.0; m];
        let mut mult = [0.0; 3];
        let mut evals = [Eval::default(); 16];

        for (xi, w) in self.volume.iter() {
            let dx = w * dx_scale;
            let pd = self.point_data(cell, &map, xi)?;
            for (e, &(shape, _)) in evals.iter_mut().zip(&shapes) {
                *e = Eval::from_jet(&self.shape_jet(shape, &pd));
            }
            let f = self.source_at(pd.x)?;
            let q = &pd.p1;

            for i in 0..nv {
                if shapes[i].1 == Slot::Lift {
                    continue;
                }
                let v = &evals[i];
                for j in 0..nv {
                    let u = &evals[j];
                    let mut a = 2.0 * nu * ddot(&u.strain, &v.strain);
                    if cut {
                        a += ls * nu * nu * dot(u.lap, v.lap) + sigma * u.div * v.div;
                    }
                    local[i * m + j] += dx * a;
                }
                for k in 0..3 {
                    let mut a = -q.values[k] * v.div;
                    if cut {
                        a -= ls * nu * dot(q.grads[k], v.lap);
                    }
                    local[i * m + nv + k] += dx * a;
                }
                let mut r = 0.0;
                if let Shape::Phi { .. } = shapes[i].0 {
                    r += dot(f, v.value);
                }
                if cut {
                    r -= ls * nu * dot(f, v.lap);
                }
                local_rhs[i] += dx * r;
            }
            for k in 0..3 {
                let row = nv + k;
                for j in 0..nv {
                    let u = &evals[j];
                    let mut a = -q.values[k] * u.div;
                    if cut {
                        a += ls * nu * dot(u.lap, q.grads[k]);
                    }
                    local[row * m + j] += dx * a;
                }
                if cut {
                    for l in 0..3 {
                        local[row * m + nv + l] -= dx * ls * dot(q.grads[l], q.grads[k]);
                    }
                    local_rhs[row] -= dx * ls * dot(f, q.grads[k]);
                }
                mult[k] += dx * q.values[k];
            }
            if let Some(rigid) = self.rigid {
                for i in 0..nv {
                    if let Shape::Rigid(_) = shapes[i].0 {
                        local_rhs[i] += dx * dot(rigid.weight, evals[i].value);
                    }
                }
            }
        }

        let slot_of = |i: usize| if i < nv { shapes[i].1 } else { Slot::Unknown(pslots[i - nv]) };
        emit(&local, &local_rhs, m, slot_of, out);
        let lambda = self.layout.multiplier();
        for k in 0..3 {
            out.triplets.push((lambda, pslots[k], mult[k]));
            out.triplets.push((pslots[k], lambda, mult[k]));
        }
        Ok(())
    }

    fn ghost_facet(&self, facet: usize, out: &mut Contribution) -> Result<()> {
        let disc = self.disc;
        let mesh = &disc.mesh;
        let cells = mesh.facets()[facet].cells();
        let sides = [cells[0], cells[1]];
        let normal = mesh.facet_normal(facet, sides[0])?;
        let maps = [mesh.cell_map(sides[0])?, mesh.cell_map(sides[1])?];

        // merge the two cells' functions; a shared unknown carries its
        // local shape on each side
        let mut merged: Vec<(Slot, [Option<Shape>; 2])> = Vec::with_capacity(24);
        for (s, &cell) in sides.iter().enumerate() {
            for (shape, slot) in self.cell_shapes(cell) {
                match merged.iter_mut().find(|(sl, _)| *sl == slot) {
                    Some(entry) => entry.1[s] = Some(shape),
                    None => {
                        let mut pair = [None, None];
                        pair[s] = Some(shape);
                        merged.push((slot, pair));
                    }
                }
            }
        }
        let count = merged.len();
        let len = mesh.facet_length(facet);
        let [a, b] = mesh.facets()[facet].vertices().map(|v| mesh.vertices()[v]);
        let mut local = vec![0.0; count * count];
        let mut dn = vec![[0.0; 2]; count];
        let mut dnn = vec![[0.0; 2]; count];
        for (t, w) in self.segment.iter() {
            let x = [a[0] + t[0] * (b[0] - a[0]), a[1] + t[0] * (b[1] - a[1])];
            let pds = [
                self.point_data(sides[0], &maps[0], maps[0].to_reference(x))?,
                self.point_data(sides[1], &maps[1], maps[1].to_reference(x))?,
            ];
            for (e, (_, pair)) in merged.iter().enumerate() {
                let mut j1 = [0.0; 2];
                let mut j2 = [0.0; 2];
                for s in 0..2 {
                    if let Some(shape) = pair[s] {
                        let u = self.shape_jet(shape, &pds[s]);
                        let sign = if s == 0 { 1.0 } else { -1.0 };
                        for c in 0..2 {
                            j1[c] += sign * dot(u[c].grad, normal);
                            j2[c] += sign * quad_form(&u[c].hess, normal);
                        }
                    }
                }
                dn[e] = j1;
                dnn[e] = j2;
            }
            let ds = w * len;
            let (c1, c2) = (self.stab.sigma_u * len * ds, self.stab.sigma_u * len * len * len * ds);
            for i in 0..count {
                if merged[i].0 == Slot::Lift {
                    continue;
                }
                for j in 0..count {
                    local[i * count + j] += c1 * dot(dn[i], dn[j]) + c2 * dot(dnn[i], dnn[j]);
                }
            }
        }
        emit(&local, &vec![0.0; count], count, |i| merged[i].0, out);
        Ok(())
    }

    fn gh_facet(&self, facet: usize, out: &mut Contribution) -> Result<()> {
        let disc = self.disc;
        let mesh = &disc.mesh;
        let cell = *mesh.facets()[facet]
            .cells()
            .iter()
            .find(|&&c| disc.classification.is_active(c))
            .ok_or(Error::NotInternalBoundaryFacet(facet))?;
        let normal = mesh.facet_normal(facet, cell)?;
        let map = mesh.cell_map(cell)?;
        let shapes = self.cell_shapes(cell);
        let nv = shapes.len();
        let pslots = self.pressure_slots(cell);
        let m = nv + 3;
        let mut local = vec![0.0; m * m];
        let len = mesh.facet_length(facet);
        let [a, b] = mesh.facets()[facet].vertices().map(|v| mesh.vertices()[v]);
        let mut jets = [ZERO_VECTOR_JET; 16];
        for (t, w) in self.segment.iter() {
            let x = [a[0] + t[0] * (b[0] - a[0]), a[1] + t[0] * (b[1] - a[1])];
            let pd = self.point_data(cell, &map, map.to_reference(x))?;
            for (jet, &(shape, _)) in jets.iter_mut().zip(&shapes) {
                *jet = self.shape_jet(shape, &pd);
            }
            let ds = w * len;
            for i in 0..nv {
                if !matches!(shapes[i].0, Shape::Phi { .. }) {
                    continue;
                }
                let v = [jets[i][0].value, jets[i][1].value];
                for j in 0..nv {
                    let d = strain(&jets[j]);
                    let dn = [d[0][0] * normal[0] + d[0][1] * normal[1], d[1][0] * normal[0] + d[1][1] * normal[1]];
                    local[i * m + j] -= ds * 2.0 * self.nu * dot(dn, v);
                }
                for k in 0..3 {
                    local[i * m + nv + k] += ds * pd.p1.values[k] * dot(normal, v);
                }
            }
        }
        let slot_of = |i: usize| if i < nv { shapes[i].1 } else { Slot::Unknown(pslots[i - nv]) };
        emit(&local, &vec![0.0; m], m, slot_of, out);
        Ok(())
    }
}

/// Jet of the rigid generator `k` times `chi` at offset `r` from the center.
fn rigid_jet(k: u8, chi: &ScalarJet, r: [f64; 2]) -> VectorJet {
    match k {
        0 => [*chi, ScalarJet::ZERO],
        1 => [ScalarJet::ZERO, *chi],
        _ => [
            chi.mul(&ScalarJet::affine(-r[1], [0.0, -1.0])),
            chi.mul(&ScalarJet::affine(r[0], [1.0, 0.0])),
        ],
    }
}

/// Writes a dense local block. The lifting column is moved to the
/// right-hand side; the lifting row does not exist.
fn emit(local: &[f64], local_rhs: &[f64], m: usize, slot_of: impl Fn(usize) -> Slot, out: &mut Contribution) {
    let lift_col = (0..m).find(|&j| slot_of(j) == Slot::Lift);
    for i in 0..m {
        let Slot::Unknown(row) = slot_of(i) else { continue };
        let mut r = local_rhs[i];
        if let Some(l) = lift_col {
            r -= local[i * m + l];
        }
        if r != 0.0 {
            out.rhs.push((row, r));
        }
        for j in 0..m {
            if let Slot::Unknown(col) = slot_of(j) {
                let v = local[i * m + j];
                if v != 0.0 {
                    out.triplets.push((row, col, v));
                }
            }
        }
    }
}

pub fn assemble_stokes(disc: &Discretization, data: &StokesData<'_>) -> Result<AssembledSystem> {
    Assembler::stokes(disc, data)?.assemble()
}

pub fn assemble_particulate(disc: &Discretization, data: &ParticleData) -> Result<AssembledSystem> {
    Assembler::particulate(disc, data)?.assemble()
}

/// Jet of the Dirichlet data at `x`, rejecting non-finite values.
pub fn boundary_jet(data: &dyn BoundaryData, x: Point) -> Result<VectorJet> {
    let u = data.jet(x);
    let finite = u.iter().all(|c| {
        c.value.is_finite() && c.grad.iter().chain(c.hess.iter().flatten()).all(|v| v.is_finite())
    });
    if finite {
        Ok(u)
    } else {
        Err(Error::NonFiniteData { x: x[0], y: x[1] })
    }
}

/// Cellwise field evaluated at a physical point of a given cell.
pub type CellField<'a, T> = &'a dyn Fn(usize, Point) -> T;

/// `|E| int_E [d_n a].[d_n b] + |E|^3 int_E [d_nn a].[d_nn b]` on a ghost
/// facet, with jumps taken as (lower-index cell) minus (higher-index cell).
pub fn ghost_jump_terms(
    mesh: &BackgroundMesh,
    classification: &DomainClassification,
    facet: usize,
    a: CellField<'_, VectorJet>,
    b: CellField<'_, VectorJet>,
) -> Result<f64> {
    if facet >= mesh.num_facets() || classification.facet_kind(facet) != FacetKind::Ghost {
        return Err(Error::NotGhostFacet(facet));
    }
    let cells = mesh.facets()[facet].cells();
    let normal = mesh.facet_normal(facet, cells[0])?;
    let len = mesh.facet_length(facet);
    let [p, q] = mesh.facets()[facet].vertices().map(|v| mesh.vertices()[v]);
    let jumps = |f: CellField<'_, VectorJet>, x: Point| {
        let (u, v) = (f(cells[0], x), f(cells[1], x));
        let mut j = [[0.0; 2]; 2];
        for c in 0..2 {
            j[0][c] = dot(u[c].grad, normal) - dot(v[c].grad, normal);
            j[1][c] = quad_form(&u[c].hess, normal) - quad_form(&v[c].hess, normal);
        }
        j
    };
    let mut s = 0.0;
    for (t, w) in segment_rule().iter() {
        let x = [p[0] + t[0] * (q[0] - p[0]), p[1] + t[0] * (q[1] - p[1])];
        let (ja, jb) = (jumps(a, x), jumps(b, x));
        s += w * len * (len * dot(ja[0], jb[0]) + len * len * len * dot(ja[1], jb[1]));
    }
    Ok(s)
}

/// `-int_E (2 nu D(a) - p I) n . v` on a facet of the internal boundary,
/// with `n` pointing out of the active cell.
pub fn gh_boundary_term(
    mesh: &BackgroundMesh,
    classification: &DomainClassification,
    facet: usize,
    nu: f64,
    a: CellField<'_, VectorJet>,
    p: CellField<'_, f64>,
    v: CellField<'_, [f64; 2]>,
) -> Result<f64> {
    if facet >= mesh.num_facets() || classification.facet_kind(facet) != FacetKind::InternalBoundary {
        return Err(Error::NotInternalBoundaryFacet(facet));
    }
    let cell = *mesh.facets()[facet]
        .cells()
        .iter()
        .find(|&&c| classification.is_active(c))
        .ok_or(Error::NotInternalBoundaryFacet(facet))?;
    let n = mesh.facet_normal(facet, cell)?;
    let len = mesh.facet_length(facet);
    let [x0, x1] = mesh.facets()[facet].vertices().map(|k| mesh.vertices()[k]);
    let mut s = 0.0;
    for (t, w) in segment_rule().iter() {
        let x = [x0[0] + t[0] * (x1[0] - x0[0]), x0[1] + t[0] * (x1[1] - x0[1])];
        let d = strain(&a(cell, x));
        let pv = p(cell, x);
        let vv = v(cell, x);
        let tn = [
            2.0 * nu * (d[0][0] * n[0] + d[0][1] * n[1]) - pv * n[0],
            2.0 * nu * (d[1][0] * n[0] + d[1][1] * n[1]) - pv * n[1],
        ];
        s -= w * len * dot(tn, vv);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_analysis::LinearFlow;

    fn disc(n: usize, cutoff: bool) -> Discretization {
        let mesh = BackgroundMesh::new(n).unwrap();
        let profile = cutoff.then(|| CutoffProfile::new(0.21, 0.45).unwrap());
        Discretization::new(mesh, LevelSet::new([0.5, 0.5], 0.21), profile).unwrap()
    }

    fn zero(_: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn still() -> Arc<dyn BoundaryData> {
        Arc::new(LinearFlow { matrix: [[0.0; 2]; 2] })
    }

    #[test]
    fn layout_dimensions() {
        let d = disc(10, true);
        let sys = assemble_particulate(&d, &ParticleData::default()).unwrap();
        let l = sys.layout;
        assert_eq!(l.pressure, 120);
        assert_eq!(l.velocity, 2 * (428 - 80));
        assert_eq!(l.dim(), l.velocity + l.pressure + 3 + 1);
        assert!(sys.triplets.iter().all(|t| t.2.is_finite()));
        let s = StokesData { nu: 1.0, stabilization: Stabilization::default(), forcing: &zero, boundary: still() };
        let sys = assemble_stokes(&d, &s).unwrap();
        assert_eq!(sys.layout.dim(), l.velocity + l.pressure + 1);
    }

    #[test]
    fn multiplier_row_is_column_transposed() {
        let d = disc(5, false);
        let s = StokesData { nu: 1.0, stabilization: Stabilization::default(), forcing: &zero, boundary: still() };
        let m = assemble_stokes(&d, &s).unwrap().matrix().unwrap();
        let lam = m.dim() - 1;
        let mut total = 0.0;
        for c in 0..m.dim() {
            assert_eq!(m.get(lam, c), m.get(c, lam));
            total += m.get(lam, c);
        }
        // sum of all P1 hat integrals is the active area
        assert!((total - d.classification().active_domain_area()).abs() < 1e-13);
        assert_ne!(m, m.transpose());
    }

    #[test]
    fn zero_data_gives_zero_rhs() {
        let d = disc(5, true);
        let data = ParticleData { gravity: [0.0, 0.0], ..ParticleData::default() };
        let sys = assemble_particulate(&d, &data).unwrap();
        assert!(sys.rhs.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn no_cut_cells_rejected() {
        let mesh = BackgroundMesh::new(4).unwrap();
        // the disk sits strictly between vertices
        let d = Discretization::new(mesh, LevelSet::new([0.125, 0.125], 0.01), None).unwrap();
        let s = StokesData { nu: 1.0, stabilization: Stabilization::default(), forcing: &zero, boundary: still() };
        assert!(matches!(Assembler::stokes(&d, &s), Err(Error::NoCutCells)));
    }

    #[test]
    fn non_finite_forcing_rejected() {
        let d = disc(5, false);
        let bad = |_: Point| [f64::NAN, 0.0];
        let s = StokesData { nu: 1.0, stabilization: Stabilization::default(), forcing: &bad, boundary: still() };
        assert!(matches!(assemble_stokes(&d, &s), Err(Error::NonFiniteData { .. })));
        let s = StokesData { nu: -1.0, ..s.clone() };
        assert!(matches!(Assembler::stokes(&d, &s), Err(Error::InvalidParameter { name: "nu", .. })));
    }
}
