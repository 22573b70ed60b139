//! CSV tables, legacy VTK and Matrix Market files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use phifem_core::assembly::Discretization;
use phifem_core::error_analysis::{CompositeSolution, ConvergenceTable};
use phifem_core::sparse::CsrMatrix;

use crate::{Error, Result};

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn eoc_cells(values: Option<Vec<f64>>, row: usize) -> String {
    match (row, values) {
        (0, _) | (_, None) => String::new(),
        (i, Some(v)) => num(v[i - 1]),
    }
}

/// Renders a convergence table. Particle tables carry the `err_U` and
/// `abs_psi` columns; tables from runs without stabilization start with a
/// `# unstabilized` line.
pub fn render_csv(table: &ConvergenceTable, unstabilized: bool) -> String {
    let rigid = table.rows.first().is_some_and(|r| r.rigid.is_some());
    let mut s = String::new();
    if unstabilized {
        s.push_str("# unstabilized\n");
    }
    s.push_str("n,h,err_u_l2,err_u_h1,err_p_l2");
    if rigid {
        s.push_str(",err_U,abs_psi");
    }
    s.push_str(",eoc_u_l2,eoc_u_h1,eoc_p_l2");
    if rigid {
        s.push_str(",eoc_U");
    }
    s.push('\n');
    let many = table.rows.len() >= 2;
    let l2 = many.then(|| table.eoc_u_l2().ok()).flatten();
    let h1 = many.then(|| table.eoc_u_h1().ok()).flatten();
    let p = many.then(|| table.eoc_p_l2().ok()).flatten();
    let u = (many && rigid).then(|| table.eoc_particle_velocity().ok()).flatten();
    for (i, r) in table.rows.iter().enumerate() {
        let _ = write!(s, "{},{},{},{},{}", r.n, num(r.h), num(r.err_u_l2), num(r.err_u_h1), num(r.err_p_l2));
        if let Some((eu, psi)) = r.rigid {
            let _ = write!(s, ",{},{}", num(eu), num(psi));
        }
        let _ = write!(s, ",{},{},{}", eoc_cells(l2.clone(), i), eoc_cells(h1.clone(), i), eoc_cells(p.clone(), i));
        if rigid {
            let _ = write!(s, ",{}", eoc_cells(u.clone(), i));
        }
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, table: &ConvergenceTable, unstabilized: bool) -> Result<()> {
    write_atomic(path, render_csv(table, unstabilized).as_bytes())
}

/// Legacy ASCII VTK 3.0 of the active mesh: velocity and pressure at the
/// active vertices, `is_cut` per cell.
pub fn render_vtk(disc: &Discretization, solution: &CompositeSolution) -> Result<String> {
    let mesh = disc.mesh();
    let cls = disc.classification();
    let active = cls.active_cells();
    // first active cell of every vertex, in cell order
    let mut owner = vec![usize::MAX; mesh.num_vertices()];
    for &c in active {
        for v in mesh.cells()[c] {
            if owner[v] == usize::MAX {
                owner[v] = c;
            }
        }
    }
    let mut index = vec![usize::MAX; mesh.num_vertices()];
    let mut points = Vec::new();
    for (v, &c) in owner.iter().enumerate() {
        if c != usize::MAX {
            index[v] = points.len();
            points.push(v);
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nphifem solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", points.len());
    for &v in &points {
        let [x, y] = mesh.vertices()[v];
        let _ = writeln!(s, "{} {} 0", num(x), num(y));
    }
    let _ = writeln!(s, "CELLS {} {}", active.len(), 4 * active.len());
    for &c in active {
        let [a, b, d] = mesh.cells()[c].map(|v| index[v]);
        let _ = writeln!(s, "3 {a} {b} {d}");
    }
    let _ = writeln!(s, "CELL_TYPES {}", active.len());
    for _ in active {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {}\nSCALARS is_cut int 1\nLOOKUP_TABLE default", active.len());
    for &c in active {
        let _ = writeln!(s, "{}", u8::from(cls.is_cut(c)));
    }
    let mut pressure = String::new();
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS velocity double", points.len());
    for &v in &points {
        let value = solution.eval(disc, owner[v], mesh.vertices()[v])?;
        let [ux, uy] = value.velocity;
        let _ = writeln!(s, "{} {} 0", num(ux), num(uy));
        let _ = writeln!(pressure, "{}", num(value.pressure));
    }
    s.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    s.push_str(&pressure);
    Ok(s)
}

pub fn write_vtk(path: &Path, disc: &Discretization, solution: &CompositeSolution) -> Result<()> {
    write_atomic(path, render_vtk(disc, solution)?.as_bytes())
}

/// Matrix Market coordinate format, 1-based indices.
pub fn render_matrix_market(matrix: &CsrMatrix) -> String {
    let n = matrix.dim();
    let mut s = String::with_capacity(40 * matrix.nnz() + 64);
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{n} {n} {}", matrix.nnz());
    for r in 0..n {
        for (c, v) in matrix.row(r) {
            let _ = writeln!(s, "{} {} {}", r + 1, c + 1, num(v));
        }
    }
    s
}

pub fn write_matrix_market(path: &Path, matrix: &CsrMatrix) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_atomic(path, render_matrix_market(matrix).as_bytes())
}
