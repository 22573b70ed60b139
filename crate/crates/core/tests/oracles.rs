use std::sync::Arc;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use phifem_core::assembly::{
    gh_boundary_term, ghost_jump_terms, Assembler, BoundaryData, Discretization, Stabilization, StokesData,
};
use phifem_core::basis::ReferenceBasis;
use phifem_core::error_analysis::{
    error_norms, self_convergence, CompositeSolution, ExactSolution, LinearFlow, ManufacturedStokes,
};
use phifem_core::geometry::{CutoffProfile, LevelSet};
use phifem_core::math::{ScalarJet, VectorJet, ZERO_VECTOR_JET};
use phifem_core::mesh::BackgroundMesh;
use phifem_core::quadrature::{degree8, triangle_rule};
use phifem_core::sparse::CsrMatrix;
use phifem_core::Point;

fn disc(n: usize, cutoff: bool) -> Discretization {
    let mesh = BackgroundMesh::new(n).unwrap();
    let profile = cutoff.then(|| CutoffProfile::new(0.21, 0.45).unwrap());
    Discretization::new(mesh, LevelSet::new([0.5, 0.5], 0.21), profile).unwrap()
}

fn random_vector(rng: &mut StdRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn quad(rule: &phifem_core::quadrature::QuadratureRule, a: i32, b: i32) -> f64 {
    rule.iter().map(|(p, w)| w * p[0].powi(a) * p[1].powi(b)).sum()
}

#[test]
fn degree8_rule_reference_values() {
    let rule = degree8();
    assert_eq!(rule.len(), 16);
    assert_relative_eq!(quad(&rule, 0, 0), 0.5, epsilon = 1e-15);
    assert_relative_eq!(quad(&rule, 4, 4), 1.0 / 6300.0, max_relative = 1e-12);
    assert_relative_eq!(quad(&rule, 8, 0), 1.0 / 90.0, max_relative = 1e-12);
    // a!b!/(a+b+2)!
    // degree 9 is out of reach: 4! 5! / 11!
    let exact = 24.0 * 120.0 / 39916800.0;
    assert!((quad(&rule, 4, 5) - exact).abs() > 1e-12);
}

#[test]
fn higher_rules_cover_degree_ten() {
    let rule = triangle_rule(10).unwrap();
    // 5! 5! / 12!
    assert_relative_eq!(quad(&rule, 5, 5), 14400.0 / 479001600.0, max_relative = 1e-11);
    assert!(triangle_rule(11).is_err());
}

#[test]
fn compress_matches_dense_accumulation() {
    let mut rng = StdRng::seed_from_u64(7);
    let dim = 50;
    let mut dense = vec![vec![0.0; dim]; dim];
    let triplets: Vec<(usize, usize, f64)> = (0..600)
        .map(|_| (rng.gen_range(0..dim), rng.gen_range(0..dim), rng.gen_range(-1.0..1.0)))
        .collect();
    for &(r, c, v) in &triplets {
        dense[r][c] += v;
    }
    let m = CsrMatrix::compress(dim, &triplets).unwrap();
    for (r, row) in dense.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            assert_relative_eq!(m.get(r, c), v, epsilon = 1e-14);
        }
    }
    let x = random_vector(&mut rng, dim);
    let y = m.matvec(&x).unwrap();
    for r in 0..dim {
        let d: f64 = (0..dim).map(|c| dense[r][c] * x[c]).sum();
        assert_relative_eq!(y[r], d, epsilon = 1e-12);
    }
}

proptest! {
    #[test]
    fn compress_is_order_independent_up_to_rounding(
        entries in prop::collection::vec((0usize..8, 0usize..8, -10i32..10), 0..40),
    ) {
        // small integers sum exactly in any order
        let triplets: Vec<_> = entries.iter().map(|&(r, c, v)| (r, c, v as f64)).collect();
        let mut reversed = triplets.clone();
        reversed.reverse();
        let a = CsrMatrix::compress(8, &triplets).unwrap();
        let b = CsrMatrix::compress(8, &reversed).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                prop_assert_eq!(a.get(r, c), b.get(r, c));
            }
        }
        prop_assert_eq!(a.transpose().transpose(), a);
    }
}

fn scalar(value: f64, grad: [f64; 2], hess: [[f64; 2]; 2]) -> ScalarJet {
    ScalarJet { value, grad, hess }
}

#[test]
fn ghost_jump_oracles() {
    let d = disc(10, false);
    let (mesh, cls) = (d.mesh(), d.classification());
    let f = cls.ghost_facets()[3];
    let cells: [usize; 2] = mesh.facets()[f].cells().try_into().unwrap();
    let n = mesh.facet_normal(f, cells[0]).unwrap();
    let xf = mesh.facet_midpoint(f);
    let len = mesh.facet_length(f);
    let s = |x: Point| n[0] * (x[0] - xf[0]) + n[1] * (x[1] - xf[1]);

    // one global quadratic: no jumps
    let smooth = |_: usize, x: Point| -> VectorJet {
        [
            scalar(x[0] * x[0], [2.0 * x[0], 0.0], [[2.0, 0.0], [0.0, 0.0]]),
            scalar(x[0] * x[1], [x[1], x[0]], [[0.0, 1.0], [1.0, 0.0]]),
        ]
    };
    assert!(ghost_jump_terms(mesh, cls, f, &smooth, &smooth).unwrap().abs() < 1e-14);

    // s^2 on the lower-index cell only: d_n jump vanishes, d_nn jump is 2
    let bump = |c: usize, x: Point| -> VectorJet {
        if c != cells[0] {
            return ZERO_VECTOR_JET;
        }
        let v = s(x);
        let j = scalar(v * v, [2.0 * v * n[0], 2.0 * v * n[1]], [
            [2.0 * n[0] * n[0], 2.0 * n[0] * n[1]],
            [2.0 * n[0] * n[1], 2.0 * n[1] * n[1]],
        ]);
        [j, j]
    };
    let value = ghost_jump_terms(mesh, cls, f, &bump, &bump).unwrap();
    assert_relative_eq!(value, 8.0 * len.powi(4), max_relative = 1e-12);

    // a kink: d_n jump is 1 per component
    let kink = |side: usize| {
        move |c: usize, x: Point| -> VectorJet {
            if c != cells[side] {
                return ZERO_VECTOR_JET;
            }
            [scalar(s(x), n, [[0.0; 2]; 2]), ZERO_VECTOR_JET[1]]
        }
    };
    let (k0, k1) = (kink(0), kink(1));
    assert_relative_eq!(ghost_jump_terms(mesh, cls, f, &k0, &k0).unwrap(), len * len, max_relative = 1e-12);
    assert_relative_eq!(ghost_jump_terms(mesh, cls, f, &k1, &k1).unwrap(), len * len, max_relative = 1e-12);
    // a field carried by the other cell has the opposite jump
    assert_relative_eq!(ghost_jump_terms(mesh, cls, f, &k0, &k1).unwrap(), -len * len, max_relative = 1e-12);

    let not_ghost = cls.gh_facets()[0];
    assert!(ghost_jump_terms(mesh, cls, not_ghost, &bump, &bump).is_err());
}

#[test]
fn gh_boundary_oracles() {
    let d = disc(10, false);
    let (mesh, cls) = (d.mesh(), d.classification());
    let zero = |_: usize, _: Point| ZERO_VECTOR_JET;
    let e = [0.3, -1.1];
    for &f in cls.gh_facets() {
        let cell = *mesh.facets()[f].cells().iter().find(|&&c| cls.is_active(c)).unwrap();
        let n = mesh.facet_normal(f, cell).unwrap();
        let len = mesh.facet_length(f);
        let p = |_: usize, _: Point| 2.5;
        let v = |_: usize, _: Point| e;
        let expected = 2.5 * len * (n[0] * e[0] + n[1] * e[1]);
        assert_relative_eq!(gh_boundary_term(mesh, cls, f, 1.0, &zero, &p, &v).unwrap(), expected, max_relative = 1e-12);

        let vanish = |_: usize, _: Point| [0.0, 0.0];
        assert_eq!(gh_boundary_term(mesh, cls, f, 1.0, &zero, &p, &vanish).unwrap(), 0.0);

        // rigid rotation has no strain
        let rotation = |_: usize, x: Point| -> VectorJet {
            [scalar(-x[1], [0.0, -1.0], [[0.0; 2]; 2]), scalar(x[0], [1.0, 0.0], [[0.0; 2]; 2])]
        };
        assert_relative_eq!(
            gh_boundary_term(mesh, cls, f, 3.0, &rotation, &p, &v).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }
    assert!(gh_boundary_term(mesh, cls, cls.ghost_facets()[0], 1.0, &zero, &|_, _| 0.0, &|_, _| [0.0; 2]).is_err());
}

fn manufactured_data(nu: f64) -> (ManufacturedStokes, impl Fn(Point) -> [f64; 2] + Sync) {
    let exact = ManufacturedStokes { nu };
    (exact, move |x: Point| exact.forcing(x))
}

#[test]
fn ghost_penalty_block_is_positive_semidefinite() {
    let d = disc(10, false);
    let (exact, forcing) = manufactured_data(1.0);
    let data = StokesData {
        nu: 1.0,
        stabilization: Stabilization::default(),
        forcing: &forcing,
        boundary: Arc::new(exact),
    };
    let asm = Assembler::stokes(&d, &data).unwrap();
    let nc = d.mesh().num_cells();
    let triplets: Vec<_> = d
        .classification()
        .ghost_facets()
        .iter()
        .flat_map(|&f| asm.item(nc + f).unwrap().triplets)
        .collect();
    let nv = asm.layout().velocity;
    assert!(triplets.iter().all(|&(r, c, _)| r < nv && c < nv));
    let j = CsrMatrix::compress(nv, &triplets).unwrap();
    let scale = j.max_abs();
    assert!(scale > 0.0);
    for r in 0..nv {
        for (c, v) in j.row(r) {
            assert!((v - j.get(c, r)).abs() <= 1e-12 * scale);
        }
    }
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..50 {
        let x = random_vector(&mut rng, nv);
        let y = j.matvec(&x).unwrap();
        let q: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(q >= -1e-10 * scale, "x^T J x = {q}");
    }
}

/// `u_h` at `x` by summing nodal basis functions directly.
fn brute_velocity(
    d: &Discretization,
    sol: &[f64],
    rigid: Option<usize>,
    cell: usize,
    xi: Point,
    lift: Option<&dyn BoundaryData>,
) -> [f64; 2] {
    let mesh = d.mesh();
    let nodes = mesh.cell_p2_nodes(cell);
    let tab = ReferenceBasis::P2.tabulate(xi);
    let sum = |values: &dyn Fn(usize) -> f64| (0..6).map(|k| tab.values[k] * values(nodes[k])).sum::<f64>();
    let phi = sum(&|i| d.phi().values()[i]);
    let vel = d.velocity_dofs();
    let mut u = [0, 1].map(|c| phi * sum(&|i| vel.dof(i, c).map_or(0.0, |k| sol[k])));
    let x = mesh.cell_map(cell).unwrap().to_physical(xi);
    if let Some(o) = rigid {
        let chi = sum(&|i| d.chi().unwrap().values()[i]);
        let c = d.level_set().center;
        let (ux, uy, psi) = (sol[o], sol[o + 1], sol[o + 2]);
        u[0] += chi * (ux - psi * (x[1] - c[1]));
        u[1] += chi * (uy + psi * (x[0] - c[0]));
    }
    if let Some(g) = lift {
        let j = g.jet(x);
        u[0] += j[0].value;
        u[1] += j[1].value;
    }
    u
}

#[test]
fn composite_velocity_matches_basis_sums() {
    let d = disc(10, true);
    let layout = phifem_core::assembly::Layout {
        velocity: d.velocity_dofs().free_dofs(),
        pressure: d.pressure_dofs().free_dofs(),
        rigid: true,
    };
    let mut rng = StdRng::seed_from_u64(3);
    let x = random_vector(&mut rng, layout.dim());
    let sol = CompositeSolution::new(&d, layout, &x, None).unwrap();
    let xi_list = [[1.0 / 3.0, 1.0 / 3.0], [0.1, 0.7], [0.0, 0.0], [0.5, 0.5]];
    for &c in d.classification().active_cells() {
        for xi in xi_list {
            let u = sol.velocity_jet(&d, c, xi).unwrap();
            let b = brute_velocity(&d, &x, layout.rigid_offset(), c, xi, None);
            assert_relative_eq!(u[0].value, b[0], epsilon = 1e-12);
            assert_relative_eq!(u[1].value, b[1], epsilon = 1e-12);
        }
    }
    assert_relative_eq!(sol.rotation().unwrap(), x[layout.rigid_offset().unwrap() + 2]);
    let discarded = (0..d.mesh().num_cells()).find(|&c| !d.classification().is_active(c)).unwrap();
    assert!(sol.velocity_jet(&d, discarded, [0.2, 0.2]).is_err());
}

#[test]
fn rigid_modes_follow_the_cutoff() {
    let d = disc(10, true);
    let layout = phifem_core::assembly::Layout {
        velocity: d.velocity_dofs().free_dofs(),
        pressure: d.pressure_dofs().free_dofs(),
        rigid: true,
    };
    let o = layout.rigid_offset().unwrap();
    let mesh = d.mesh();
    let c = d.level_set().center;
    let chi = d.chi().unwrap();
    let mut x = vec![0.0; layout.dim()];
    x[o] = 1.0;
    let translation = CompositeSolution::new(&d, layout, &x, None).unwrap();
    x[o] = 0.0;
    x[o + 2] = 1.0;
    let rotation = CompositeSolution::new(&d, layout, &x, None).unwrap();
    for &cell in d.classification().active_cells() {
        let map = mesh.cell_map(cell).unwrap();
        for xi in [[0.2, 0.3], [0.6, 0.1]] {
            let p = map.to_physical(xi);
            let k = chi.eval(mesh, cell, xi);
            let t = translation.eval(&d, cell, p).unwrap();
            assert_relative_eq!(t.velocity[0], k, epsilon = 1e-13);
            assert_eq!(t.velocity[1], 0.0);
            let r = rotation.eval(&d, cell, p).unwrap();
            assert_relative_eq!(r.velocity[0], -k * (p[1] - c[1]), epsilon = 1e-13);
            assert_relative_eq!(r.velocity[1], k * (p[0] - c[0]), epsilon = 1e-13);
        }
    }
}

#[test]
fn lifted_velocity_matches_basis_sums() {
    let d = disc(8, false);
    let layout = phifem_core::assembly::Layout {
        velocity: d.velocity_dofs().free_dofs(),
        pressure: d.pressure_dofs().free_dofs(),
        rigid: false,
    };
    let lift: Arc<dyn BoundaryData> = Arc::new(ManufacturedStokes { nu: 1.0 });
    let mut rng = StdRng::seed_from_u64(5);
    let x = random_vector(&mut rng, layout.dim());
    let sol = CompositeSolution::new(&d, layout, &x, Some(lift.clone())).unwrap();
    for &c in d.classification().active_cells() {
        let u = sol.velocity_jet(&d, c, [0.25, 0.25]).unwrap();
        let b = brute_velocity(&d, &x, None, c, [0.25, 0.25], Some(lift.as_ref()));
        assert_relative_eq!(u[0].value, b[0], epsilon = 1e-12);
        assert_relative_eq!(u[1].value, b[1], epsilon = 1e-12);
    }
}

#[test]
fn error_norms_ignore_pressure_shifts() {
    let d = disc(10, false);
    let layout = phifem_core::assembly::Layout {
        velocity: d.velocity_dofs().free_dofs(),
        pressure: d.pressure_dofs().free_dofs(),
        rigid: false,
    };
    let exact = ManufacturedStokes { nu: 1.0 };
    let mut rng = StdRng::seed_from_u64(9);
    let mut x: Vec<f64> = random_vector(&mut rng, layout.dim()).iter().map(|v| 0.01 * v).collect();
    let a = error_norms(&d, &CompositeSolution::new(&d, layout, &x, Some(Arc::new(exact))).unwrap(), &exact).unwrap();
    for v in &mut x[layout.pressure_offset()..layout.pressure_offset() + layout.pressure] {
        *v += 3.7;
    }
    let b = error_norms(&d, &CompositeSolution::new(&d, layout, &x, Some(Arc::new(exact))).unwrap(), &exact).unwrap();
    assert_relative_eq!(a.p_l2, b.p_l2, max_relative = 1e-9);
    assert_eq!(a.u_l2, b.u_l2);
    assert_relative_eq!(a.area, d.classification().active_domain_area(), max_relative = 1e-12);
}

#[test]
fn exact_linear_field_has_zero_error() {
    let d = disc(6, false);
    let layout = phifem_core::assembly::Layout {
        velocity: d.velocity_dofs().free_dofs(),
        pressure: d.pressure_dofs().free_dofs(),
        rigid: false,
    };
    let flow = LinearFlow { matrix: [[1.0, 2.0], [0.5, -1.0]] };
    let sol = CompositeSolution::new(&d, layout, &vec![0.0; layout.dim()], Some(Arc::new(flow))).unwrap();
    let e = error_norms(&d, &sol, &flow).unwrap();
    assert!(e.u_l2 < 1e-14 && e.u_h1 < 1e-13 && e.p_l2 == 0.0);
    assert!(e.ref_u_h1 > 0.0);
}

#[test]
fn self_convergence_against_itself_is_zero() {
    let d = disc(10, true);
    let layout = phifem_core::assembly::Layout {
        velocity: d.velocity_dofs().free_dofs(),
        pressure: d.pressure_dofs().free_dofs(),
        rigid: true,
    };
    let mut rng = StdRng::seed_from_u64(1);
    let x = random_vector(&mut rng, layout.dim());
    let sol = CompositeSolution::new(&d, layout, &x, None).unwrap();
    let s = self_convergence(&d, &sol, &d, &sol).unwrap();
    assert_eq!(s.cells, d.classification().active_cells().len());
    assert!(s.norms.u_l2 < 1e-13 && s.norms.u_h1 < 1e-12 && s.norms.p_l2 < 1e-13);
    assert_eq!((s.particle_velocity_rel, s.rotation_abs), (0.0, 0.0));
}

#[test]
fn forcing_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(2024);
    let step = 1e-4;
    for nu in [1.0, 0.5] {
        let exact = ManufacturedStokes { nu };
        for _ in 0..100 {
            let x = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let at = |dx: f64, dy: f64| exact.velocity([x[0] + dx, x[1] + dy]);
            let u0 = at(0.0, 0.0);
            let (e, w, n, s) = (at(step, 0.0), at(-step, 0.0), at(0.0, step), at(0.0, -step));
            let p = |dx: f64, dy: f64| exact.pressure([x[0] + dx, x[1] + dy]);
            let gp = [(p(step, 0.0) - p(-step, 0.0)) / (2.0 * step), (p(0.0, step) - p(0.0, -step)) / (2.0 * step)];
            let f = exact.forcing(x);
            for c in 0..2 {
                let lap = (e[c] + w[c] + n[c] + s[c] - 4.0 * u0[c]) / (step * step);
                assert!((f[c] - (-nu * lap + gp[c])).abs() < 1e-6, "x = {x:?}");
            }
            let div = (e[0] - w[0]) / (2.0 * step) + (n[1] - s[1]) / (2.0 * step);
            assert!(div.abs() < 1e-6);
            let g = exact.velocity_gradient(x);
            assert_relative_eq!(g[0][0] + g[1][1], 0.0, epsilon = 1e-14);
            let jet = exact.jet(x);
            assert_relative_eq!(jet[0].laplacian(), -2.0 * std::f64::consts::PI.powi(2) * u0[0], epsilon = 1e-12);
        }
    }
}
