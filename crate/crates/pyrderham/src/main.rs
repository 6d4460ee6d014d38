//! Command-line front end: element self-tests, demo mesh refinement,
//! distortion reports and convergence studies.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use pyrderham::harness::{
    build_study_base, element_checks, run_convergence, seed_from_env, MeshSource, StudyConfig,
};
use pyrderham::mesh::{TetDiagonal, ThpMesh};
use pyrderham::refbasis::SpaceKind;

#[derive(Parser)]
#[command(
    name = "pyrderham",
    about = "Composite de Rham finite elements on pyramids and THP meshes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpaceArg {
    H1,
    Hcurl,
    Hdiv,
    L2,
}

impl From<SpaceArg> for SpaceKind {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::H1 => SpaceKind::H1,
            SpaceArg::Hcurl => SpaceKind::HCurl,
            SpaceArg::Hdiv => SpaceKind::HDiv,
            SpaceArg::L2 => SpaceKind::L2,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Fixed,
    Shortest,
}

impl From<StrategyArg> for TetDiagonal {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Fixed => TetDiagonal::Fixed,
            StrategyArg::Shortest => TetDiagonal::Shortest,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the duality / exactness / commuting suites per element kind.
    CheckElement,
    /// Uniformly refine a mesh file.
    Refine {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::Fixed)]
        strategy: StrategyArg,
    },
    /// Report quad-face defects and Jacobian scaling across levels.
    Distortion {
        /// mesh file; the built-in perturbed demo base when omitted
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        /// perturbation for the built-in demo base
        #[arg(long, default_value_t = 0.1)]
        perturb: f64,
    },
    /// Run an interpolation convergence study and emit CSV.
    Convergence {
        #[arg(long, value_enum)]
        space: SpaceArg,
        #[arg(long, default_value = "trig")]
        field: String,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 0.1)]
        perturb: f64,
        /// CSV output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// study a mesh file instead of the built-in demo base
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// quadrature degree override for the DOF integrals
        #[arg(long)]
        quad_degree: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> pyrderham::Result<bool> {
    match cli.command {
        Command::CheckElement => {
            let start = Instant::now();
            let lines = element_checks();
            let mut all_pass = true;
            for line in &lines {
                let status = if line.pass() { "PASS" } else { "FAIL" };
                all_pass &= line.pass();
                println!(
                    "{:<32} max err {:>9.2e}  tol {:>7.1e}  {}",
                    line.name, line.max_err, line.tol, status
                );
            }
            println!(
                "{} of {} checks passed in {:.2}s",
                lines.iter().filter(|l| l.pass()).count(),
                lines.len(),
                start.elapsed().as_secs_f64()
            );
            Ok(all_pass)
        }
        Command::Refine {
            mesh,
            levels,
            out,
            strategy,
        } => {
            let mut m = ThpMesh::load(&mesh)?;
            for _ in 0..levels {
                m = m.refine_with(strategy.into())?;
            }
            m.save(&out)?;
            println!(
                "refined {} level(s): {} vertices, {} elements -> {}",
                levels,
                m.vertices.len(),
                m.elements.len(),
                out.display()
            );
            Ok(true)
        }
        Command::Distortion {
            mesh,
            levels,
            perturb,
        } => {
            let mut m = match mesh {
                Some(path) => ThpMesh::load(&path)?,
                None => build_study_base(perturb, seed_from_env())?,
            };
            let mut prev: Option<pyrderham::mesh::DistortionReport> = None;
            for level in 0..=levels {
                if level > 0 {
                    m = m.refine_with(TetDiagonal::Shortest)?;
                }
                let report = m.distortion();
                println!(
                    "level {level}: h {:.6e}  max|vP| pyr {:.6e}  max hex defect {:.6e}  max|F| {:.6e}  max|J| {:.6e}",
                    report.h,
                    report.max_pyramid_defect(),
                    report.max_hex_defect(),
                    report.max_f,
                    report.max_j
                );
                if let Some(p) = &prev {
                    println!(
                        "         ratios: vP {:.4}  |F| {:.4}  |J| {:.4}",
                        report.max_pyramid_defect() / p.max_pyramid_defect(),
                        report.max_f / p.max_f,
                        report.max_j / p.max_j
                    );
                }
                if level == 0 {
                    for (i, d) in &report.pyramid_defects {
                        println!("  pyramid {i}: |vP| = {d:.6e}");
                    }
                    for (i, d) in &report.hex_defects {
                        println!(
                            "  hex {i}: face defects x0 {:.3e} x1 {:.3e} y0 {:.3e} y1 {:.3e} bottom {:.3e} top {:.3e}",
                            d[0], d[1], d[2], d[3], d[4], d[5]
                        );
                    }
                }
                prev = Some(report);
            }
            Ok(true)
        }
        Command::Convergence {
            space,
            field,
            levels,
            perturb,
            out,
            mesh,
            quad_degree,
        } => {
            let mut cfg = StudyConfig::new(space.into(), &field, levels);
            cfg.perturbation = perturb;
            cfg.dof_degree = quad_degree;
            if let Some(path) = mesh {
                cfg.mesh = MeshSource::File(path);
            }
            let start = Instant::now();
            let report = run_convergence(&cfg)?;
            let csv = report.to_csv();
            match out {
                Some(path) => {
                    std::fs::write(&path, &csv)?;
                    println!("{csv}");
                    println!(
                        "wrote {} rows to {} in {:.1}s",
                        report.rows.len(),
                        path.display(),
                        start.elapsed().as_secs_f64()
                    );
                }
                None => print!("{csv}"),
            }
            Ok(true)
        }
    }
}
