use std::collections::BTreeSet;

use phifem_core::basis::{DofMap, SpaceKind};
use phifem_core::geometry::{classify, interpolate_p2, CellKind, DomainClassification, FacetKind, LevelSet};
use phifem_core::mesh::BackgroundMesh;
use phifem_core::Error;

const GOLDEN: &str = include_str!("data/classification.csv");

fn disk() -> LevelSet {
    LevelSet::new([0.5, 0.5], 0.21)
}

/// `phi * (100 n)^2` at grid vertex `(i, j)`, exact in integers.
fn scaled_phi(n: i64, i: i64, j: i64) -> i64 {
    let (dx, dy) = (100 * i - 50 * n, 100 * j - 50 * n);
    441 * n * n - dx * dx - dy * dy
}

/// Vertex-sign sweep over grid squares, independent of the mesh type.
/// Returns per-cell (active, cut) flags in mesh cell order.
fn sweep(n: usize) -> Vec<(bool, bool)> {
    let mut out = Vec::with_capacity(2 * n * n);
    let m = n as i64;
    for j in 0..m {
        for i in 0..m {
            let lower = [(i, j), (i + 1, j), (i + 1, j + 1)];
            let upper = [(i, j), (i + 1, j + 1), (i, j + 1)];
            for tri in [lower, upper] {
                let s: Vec<i64> = tri.iter().map(|&(a, b)| scaled_phi(m, a, b)).collect();
                let active = s.iter().any(|&v| v <= 0);
                out.push((active, active && s.iter().any(|&v| v >= 0)));
            }
        }
    }
    out
}

fn golden() -> Vec<[usize; 10]> {
    GOLDEN
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<usize> = l.split(',').map(|s| s.parse().unwrap()).collect();
            v.try_into().unwrap()
        })
        .collect()
}

fn counts(mesh: &BackgroundMesh, cls: &DomainClassification) -> [usize; 10] {
    let p1 = DofMap::new(mesh, cls, SpaceKind::ScalarP1);
    let p2 = DofMap::new(mesh, cls, SpaceKind::VectorP2);
    [
        mesh.n(),
        cls.active_cells().len(),
        cls.cut_cells().len(),
        cls.discarded_count(),
        cls.ghost_facets().len(),
        cls.gh_facets().len(),
        cls.wall_facets().len(),
        p1.free_dofs(),
        p2.total_dofs() / 2,
        p2.constrained_dofs() / 2,
    ]
}

#[test]
fn golden_counts() {
    for row in golden() {
        let mesh = BackgroundMesh::new(row[0]).unwrap();
        let cls = classify(&mesh, &disk()).unwrap();
        assert_eq!(counts(&mesh, &cls), row, "n = {}", row[0]);
    }
}

#[test]
fn cell_flags_match_integer_sweep() {
    for row in golden() {
        let n = row[0];
        let mesh = BackgroundMesh::new(n).unwrap();
        let cls = classify(&mesh, &disk()).unwrap();
        let flags = sweep(n);
        for (c, &(active, cut)) in flags.iter().enumerate() {
            assert_eq!(cls.is_active(c), active, "n = {n}, cell {c}");
            assert_eq!(cls.is_cut(c), cut, "n = {n}, cell {c}");
        }
        assert_eq!(flags.iter().filter(|f| f.0).count(), row[1]);
        assert_eq!(flags.iter().filter(|f| f.1).count(), row[2]);
        let mut touched = BTreeSet::new();
        for (c, f) in flags.iter().enumerate() {
            if f.0 {
                touched.extend(mesh.cells()[c]);
            }
        }
        assert_eq!(touched.len(), row[7], "active vertices, n = {n}");
    }
}

fn check_invariants(mesh: &BackgroundMesh, cls: &DomainClassification, phi: &LevelSet) {
    let value = |v: usize| {
        let [x, y] = mesh.vertices()[v];
        let (dx, dy) = (x - phi.center[0], y - phi.center[1]);
        phi.radius * phi.radius - dx * dx - dy * dy
    };
    let active: BTreeSet<usize> = cls.active_cells().iter().copied().collect();
    let cut: BTreeSet<usize> = cls.cut_cells().iter().copied().collect();
    assert!(cut.is_subset(&active));
    assert_eq!(active.len() + cls.discarded_count(), mesh.num_cells());
    for c in 0..mesh.num_cells() {
        if !active.contains(&c) {
            assert_eq!(cls.cell_kind(c), CellKind::Discarded);
            assert!(mesh.cells()[c].iter().all(|&v| value(v) > 0.0));
        }
    }
    for &f in cls.ghost_facets() {
        let facet = &mesh.facets()[f];
        assert!(!facet.is_wall());
        assert_eq!(facet.cells().len(), 2);
        assert!(facet.cells().iter().all(|c| active.contains(c)));
        assert!(facet.cells().iter().any(|c| cut.contains(c)));
    }
    for &f in cls.gh_facets() {
        let facet = &mesh.facets()[f];
        assert_eq!(facet.cells().iter().filter(|c| active.contains(c)).count(), 1);
        assert!(facet.vertices().iter().all(|&v| value(v) > 0.0), "G_h facet {f}");
    }
    for &f in cls.wall_facets() {
        let facet = &mesh.facets()[f];
        assert!(facet.is_wall());
        assert!(active.contains(&facet.cells()[0]));
    }
    for f in 0..mesh.num_facets() {
        let kind = cls.facet_kind(f);
        assert_eq!(kind == FacetKind::Ghost, cls.ghost_facets().contains(&f));
        assert_eq!(kind == FacetKind::InternalBoundary, cls.gh_facets().contains(&f));
    }
    let area: f64 = cls.active_cells().iter().map(|&c| mesh.signed_area(c)).sum();
    assert!((area - cls.active_domain_area()).abs() < 1e-12);
}

#[test]
fn partition_and_facet_invariants() {
    for n in [2, 5, 10, 40] {
        let mesh = BackgroundMesh::new(n).unwrap();
        let cls = classify(&mesh, &disk()).unwrap();
        check_invariants(&mesh, &cls, &disk());
    }
    // off-center disks
    for (c, r, n) in [([0.4, 0.55], 0.17, 16), ([0.62, 0.37], 0.2, 25), ([0.5, 0.5], 0.33, 12)] {
        let mesh = BackgroundMesh::new(n).unwrap();
        let phi = LevelSet::new(c, r);
        let cls = classify(&mesh, &phi).unwrap();
        check_invariants(&mesh, &cls, &phi);
    }
}

#[test]
fn level_set_interpolant_continuous_across_ghost_facets() {
    let mesh = BackgroundMesh::new(20).unwrap();
    let cls = classify(&mesh, &disk()).unwrap();
    let phi_h = interpolate_p2(&mesh, &disk());
    for &f in cls.ghost_facets() {
        let m = mesh.facet_midpoint(f);
        let [a, b] = [0, 1].map(|s| {
            let c = mesh.facets()[f].cells()[s];
            let xi = mesh.cell_map(c).unwrap().to_reference(m);
            phi_h.eval(&mesh, c, xi)
        });
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn degenerate_level_sets() {
    let mesh = BackgroundMesh::new(4).unwrap();
    let fluid = classify(&mesh, &|_: [f64; 2]| -1.0).unwrap();
    assert_eq!(fluid.active_cells().len(), 32);
    assert!(fluid.cut_cells().is_empty() && fluid.gh_facets().is_empty() && fluid.ghost_facets().is_empty());
    assert!(matches!(classify(&mesh, &|_: [f64; 2]| 1.0), Err(Error::EmptyActiveMesh)));
    // a disk that reaches the wall
    assert!(classify(&mesh, &LevelSet::new([0.5, 0.5], 0.6)).is_err());
}

#[test]
fn fluid_only_dof_counts() {
    let mesh = BackgroundMesh::new(2).unwrap();
    let cls = classify(&mesh, &|_: [f64; 2]| -1.0).unwrap();
    let p1 = DofMap::new(&mesh, &cls, SpaceKind::ScalarP1);
    let p2 = DofMap::new(&mesh, &cls, SpaceKind::VectorP2);
    assert_eq!((p1.total_dofs(), p1.free_dofs()), (9, 9));
    // 25 P2 nodes, 16 of them on the wall
    assert_eq!((p2.total_dofs(), p2.constrained_dofs(), p2.free_dofs()), (50, 32, 18));
}
