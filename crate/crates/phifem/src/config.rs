//! Command-line flags and the optional TOML configuration file. Flags
//! override file values, which override the defaults of the scheme.

use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Deserialize;

use crate::study::{Scheme, StudyConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, Parser)]
#[command(name = "phifem", version, about = "Unfitted finite element solver for Stokes flow around a disk and a sedimenting particle")]
pub struct Cli {
    /// stokes (manufactured solution) or particulate (self-convergence)
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    /// Mesh subdivisions per side, comma separated
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Reference subdivisions for particulate self-convergence
    #[arg(long)]
    pub ref_n: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sigma_u: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub rho_f: Option<f64>,
    #[arg(long)]
    pub rho_s: Option<f64>,
    /// Magnitude of the (downward) gravity
    #[arg(long)]
    pub gravity: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Outer radius of the cut-off function
    #[arg(long)]
    pub r1: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a VTK file per level
    #[arg(long)]
    pub vtk: bool,
    /// Write each system matrix in Matrix Market format
    #[arg(long)]
    pub dump_matrix: bool,
    /// TOML file with any of the keys above (snake_case)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scheme: Option<Scheme>,
    pub n: Option<Vec<usize>>,
    pub ref_n: Option<usize>,
    pub sigma: Option<f64>,
    pub sigma_u: Option<f64>,
    pub nu: Option<f64>,
    pub rho_f: Option<f64>,
    pub rho_s: Option<f64>,
    pub gravity: Option<f64>,
    pub radius: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub r1: Option<f64>,
    pub out: Option<PathBuf>,
    pub vtk: Option<bool>,
    pub dump_matrix: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($field:ident),*) => {
        $(if let Some(v) = $src.$field.clone() { $dst.$field = v; })*
    };
}

/// Merges defaults, the optional file and the flags, then validates.
pub fn resolve(cli: &Cli) -> Result<StudyConfig> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let scheme = cli.scheme.or(file.scheme).unwrap_or(Scheme::Stokes);
    let mut cfg = StudyConfig::new(scheme);
    overlay!(cfg, file, n, ref_n, sigma, sigma_u, nu, rho_f, rho_s, gravity, radius, center, r1, out, vtk, dump_matrix);
    overlay!(cfg, cli, n, ref_n, sigma, sigma_u, nu, rho_f, rho_s, gravity, radius, r1, out);
    cfg.vtk |= cli.vtk;
    cfg.dump_matrix |= cli.dump_matrix;
    cfg.validate()?;
    Ok(cfg)
}
