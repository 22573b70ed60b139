//! Exit codes: 0 when every solve met the residual contract, 1 on a solve or
//! output failure, 2 on invalid arguments or configuration.

use std::process::ExitCode;

use clap::Parser;
use phifem::config::{resolve, Cli};
use phifem::study::{run_particulate_study, run_stokes_study, Scheme};
use phifem::Error;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match config.scheme {
        Scheme::Stokes => run_stokes_study(&config).map(|s| {
            for level in &s.levels {
                println!(
                    "n={:<4} residual={:.2e} int(p_h)={:.1e} |div u_h|={:.3e}",
                    level.solved.disc.mesh().n(),
                    level.solved.report.relative_residual,
                    level.solved.pressure_integral,
                    level.norms.div_l2
                );
            }
            s.csv
        }),
        Scheme::Particulate => run_particulate_study(&config).map(|s| {
            for l in s.levels.iter().chain(std::iter::once(&s.reference)) {
                println!(
                    "n={:<4} U=({:+.10e}, {:+.10e}) psi={:+.3e} residual={:.2e}",
                    l.n, l.particle_velocity[0], l.particle_velocity[1], l.rotation, l.report.relative_residual
                );
            }
            s.csv
        }),
    };
    match result {
        Ok(csv) => {
            println!("wrote {}", csv.display());
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
