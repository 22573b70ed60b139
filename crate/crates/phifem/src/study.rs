//! Single solves and convergence studies.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use phifem_core::assembly::{AssembledSystem, Assembler, BoundaryData, Discretization, ParticleData, Stabilization, StokesData};
use phifem_core::error_analysis::{
    error_norms, self_convergence, CompositeSolution, ConvergenceRow, ConvergenceTable, ErrorNorms,
    ManufacturedStokes,
};
use phifem_core::geometry::{CutoffProfile, LevelSet};
use phifem_core::mesh::BackgroundMesh;
use serde::Deserialize;

use crate::output;
use crate::parallel;
use crate::solver::{lu_solve_bordered, Border, SolveReport};
use crate::{Error, Result};

/// Bound on `|int_{Omega_h} p_h|` checked after every solve.
pub const PRESSURE_MEAN_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Stokes,
    Particulate,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Stokes => "stokes",
            Scheme::Particulate => "particulate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub scheme: Scheme,
    pub n: Vec<usize>,
    /// Reference resolution for particle self-convergence.
    pub ref_n: usize,
    pub sigma: f64,
    pub sigma_u: f64,
    pub nu: f64,
    pub rho_f: f64,
    pub rho_s: f64,
    /// Magnitude of the downward gravity.
    pub gravity: f64,
    pub radius: f64,
    pub center: [f64; 2],
    /// Outer radius of the cut-off.
    pub r1: f64,
    pub out: PathBuf,
    pub vtk: bool,
    pub dump_matrix: bool,
}

impl StudyConfig {
    pub fn new(scheme: Scheme) -> Self {
        StudyConfig {
            scheme,
            n: match scheme {
                Scheme::Stokes => vec![10, 20, 40, 80],
                Scheme::Particulate => vec![10, 20, 40],
            },
            ref_n: 160,
            sigma: 20.0,
            sigma_u: 20.0,
            nu: 1.0,
            rho_f: 1.0,
            rho_s: 2.0,
            gravity: 10.0,
            radius: 0.21,
            center: [0.5, 0.5],
            r1: 0.45,
            out: PathBuf::from("out"),
            vtk: false,
            dump_matrix: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n.is_empty() {
            return bad("the n list is empty".into());
        }
        if let Some(&n) = self.n.iter().find(|&&n| n < 2) {
            return bad(format!("n = {n} is too coarse (need n >= 2)"));
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n values must be strictly increasing, got {:?}", self.n));
        }
        if self.scheme == Scheme::Particulate {
            if let Some(&n) = self.n.iter().find(|&&n| self.ref_n % n != 0) {
                return bad(format!("n = {n} does not divide the reference n = {}", self.ref_n));
            }
        }
        let positive = [("nu", self.nu), ("rho-f", self.rho_f), ("rho-s", self.rho_s), ("radius", self.radius)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("sigma", self.sigma), ("sigma-u", self.sigma_u), ("gravity", self.gravity)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.r1 > self.radius) {
            return bad(format!("r1 = {} must exceed the radius {}", self.r1, self.radius));
        }
        Ok(())
    }

    pub fn unstabilized(&self) -> bool {
        self.sigma == 0.0 || self.sigma_u == 0.0
    }

    pub fn level_set(&self) -> LevelSet {
        LevelSet::new(self.center, self.radius)
    }

    pub fn stabilization(&self) -> Stabilization {
        Stabilization { sigma: self.sigma, sigma_u: self.sigma_u }
    }

    pub fn particle_data(&self) -> ParticleData {
        ParticleData {
            nu: self.nu,
            rho_f: self.rho_f,
            rho_s: self.rho_s,
            gravity: [0.0, -self.gravity],
            stabilization: self.stabilization(),
        }
    }

    fn artifact(&self, n: usize, ext: &str) -> PathBuf {
        self.out.join(format!("{}_n{n}.{ext}", self.scheme.name()))
    }
}

/// A solved system with its discretization.
#[derive(Debug, Clone)]
pub struct Solved {
    pub disc: Discretization,
    pub solution: CompositeSolution,
    pub report: SolveReport,
    /// `int_{Omega_h} p_h`
    pub pressure_integral: f64,
}

/// Solves the Stokes problem on an `n x n` mesh around the disk of `level_set`.
pub fn solve_stokes(n: usize, level_set: LevelSet, data: &StokesData<'_>, dump: Option<&Path>) -> Result<Solved> {
    let disc = Discretization::new(BackgroundMesh::new(n)?, level_set, None)?;
    let (system, lift) = {
        let assembler = Assembler::stokes(&disc, data)?;
        (parallel::assemble(&assembler)?, assembler.lift().cloned())
    };
    solve_system(disc, system, lift, dump)
}

/// Solves the particle problem on an `n x n` mesh.
pub fn solve_particulate(n: usize, config: &StudyConfig, dump: Option<&Path>) -> Result<Solved> {
    let profile = CutoffProfile::new(config.radius, config.r1)?;
    let disc = Discretization::new(BackgroundMesh::new(n)?, config.level_set(), Some(profile))?;
    let data = config.particle_data();
    let system = parallel::assemble(&Assembler::particulate(&disc, &data)?)?;
    solve_system(disc, system, None, dump)
}

fn solve_system(
    disc: Discretization,
    system: AssembledSystem,
    lift: Option<Arc<dyn BoundaryData>>,
    dump: Option<&Path>,
) -> Result<Solved> {
    let matrix = system.matrix()?;
    let AssembledSystem { layout, rhs, .. } = system;
    if let Some(path) = dump {
        output::write_matrix_market(path, &matrix)?;
    }
    // The rigid and multiplier rows are dense. Without the multiplier the
    // remaining block keeps the constant pressure in its kernel.
    let mut unknowns: Vec<usize> = layout.rigid_offset().map(|o| (o..o + 3).collect()).unwrap_or_default();
    unknowns.push(layout.multiplier());
    let border = Border { unknowns, anchor: (layout.pressure > 0).then(|| layout.pressure_offset()) };
    let report = lu_solve_bordered(&matrix, &rhs, &border)?;
    drop(matrix);
    let solution = CompositeSolution::new(&disc, layout, &report.solution, lift)?;
    let pressure_integral = solution.pressure_integral(&disc);
    if !(pressure_integral.abs() <= PRESSURE_MEAN_LIMIT) {
        return Err(Error::Singular(format!("pressure mean {pressure_integral:e} is not zero")));
    }
    Ok(Solved { disc, solution, report, pressure_integral })
}

/// One level of a Stokes study.
#[derive(Debug, Clone)]
pub struct StokesLevel {
    pub solved: Solved,
    pub norms: ErrorNorms,
}

#[derive(Debug, Clone)]
pub struct StokesStudy {
    pub table: ConvergenceTable,
    pub levels: Vec<StokesLevel>,
    pub csv: PathBuf,
}

/// Manufactured-solution study over `config.n`; writes `stokes.csv`.
pub fn run_stokes_study(config: &StudyConfig) -> Result<StokesStudy> {
    config.validate()?;
    let exact = ManufacturedStokes { nu: config.nu };
    let forcing = move |x| exact.forcing(x);
    let data = StokesData {
        nu: config.nu,
        stabilization: config.stabilization(),
        forcing: &forcing,
        boundary: Arc::new(exact),
    };
    create_dir(&config.out)?;
    let mut levels = Vec::new();
    let mut table = ConvergenceTable::default();
    for &n in &config.n {
        let level = (|| {
            let dump = config.dump_matrix.then(|| config.artifact(n, "mtx"));
            let solved = solve_stokes(n, config.level_set(), &data, dump.as_deref())?;
            let norms = error_norms(&solved.disc, &solved.solution, &exact)?;
            if config.vtk {
                output::write_vtk(&config.artifact(n, "vtk"), &solved.disc, &solved.solution)?;
            }
            Ok::<_, Error>(StokesLevel { solved, norms })
        })()
        .map_err(|e| e.at_level(n))?;
        info!(
            "stokes n={n}: residual {:.2e}, L2 {:.4e}, H1 {:.4e}, p {:.4e}",
            level.solved.report.relative_residual,
            level.norms.u_l2_rel(),
            level.norms.u_h1_rel(),
            level.norms.p_l2_rel()
        );
        table.rows.push(ConvergenceRow {
            n,
            h: level.solved.disc.mesh().h(),
            err_u_l2: level.norms.u_l2_rel(),
            err_u_h1: level.norms.u_h1_rel(),
            err_p_l2: level.norms.p_l2_rel(),
            rigid: None,
        });
        levels.push(level);
    }
    let csv = config.out.join("stokes.csv");
    output::write_csv(&csv, &table, config.unstabilized())?;
    Ok(StokesStudy { table, levels, csv })
}

/// One coarse level of a particle study.
#[derive(Debug, Clone)]
pub struct ParticleLevel {
    pub n: usize,
    pub particle_velocity: [f64; 2],
    pub rotation: f64,
    pub report: SolveReport,
    pub pressure_integral: f64,
    pub div_l2: f64,
}

#[derive(Debug, Clone)]
pub struct ParticulateStudy {
    pub table: ConvergenceTable,
    pub levels: Vec<ParticleLevel>,
    pub reference: ParticleLevel,
    pub csv: PathBuf,
}

fn particle_level(n: usize, solved: &Solved, div_l2: f64) -> ParticleLevel {
    ParticleLevel {
        n,
        particle_velocity: solved.solution.particle_velocity().unwrap_or_default(),
        rotation: solved.solution.rotation().unwrap_or_default(),
        report: solved.report.clone(),
        pressure_integral: solved.pressure_integral,
        div_l2,
    }
}

/// Self-convergence study against a solve at `config.ref_n`; writes
/// `particulate.csv`.
pub fn run_particulate_study(config: &StudyConfig) -> Result<ParticulateStudy> {
    config.validate()?;
    create_dir(&config.out)?;
    let reference = solve_particulate(config.ref_n, config, None).map_err(|e| e.at_level(config.ref_n))?;
    let ref_level = particle_level(config.ref_n, &reference, f64::NAN);
    info!(
        "particulate reference n={}: U = ({:.6e}, {:.6e}), psi = {:.3e}",
        config.ref_n, ref_level.particle_velocity[0], ref_level.particle_velocity[1], ref_level.rotation
    );
    let mut table = ConvergenceTable::default();
    let mut levels = Vec::new();
    for &n in &config.n {
        let (row, level) = (|| {
            let dump = config.dump_matrix.then(|| config.artifact(n, "mtx"));
            let solved = solve_particulate(n, config, dump.as_deref())?;
            let sc = self_convergence(&solved.disc, &solved.solution, &reference.disc, &reference.solution)?;
            if config.vtk {
                output::write_vtk(&config.artifact(n, "vtk"), &solved.disc, &solved.solution)?;
            }
            let row = ConvergenceRow {
                n,
                h: solved.disc.mesh().h(),
                err_u_l2: sc.norms.u_l2_rel(),
                err_u_h1: sc.norms.u_h1_rel(),
                err_p_l2: sc.norms.p_l2_rel(),
                rigid: Some((sc.particle_velocity_rel, sc.rotation_abs)),
            };
            Ok::<_, Error>((row, particle_level(n, &solved, sc.norms.div_l2)))
        })()
        .map_err(|e| e.at_level(n))?;
        info!(
            "particulate n={n}: U = ({:.6e}, {:.6e}), psi = {:.3e}, residual {:.2e}",
            level.particle_velocity[0], level.particle_velocity[1], level.rotation, level.report.relative_residual
        );
        table.rows.push(row);
        levels.push(level);
    }
    let csv = config.out.join("particulate.csv");
    output::write_csv(&csv, &table, config.unstabilized())?;
    Ok(ParticulateStudy { table, levels, reference: ref_level, csv })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
