//! Command-line interface: single-shot pipeline stages plus the config-driven
//! study runner. Exit codes: 0 success, 2 configuration/usage error, 3 solver
//! failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::cell::{CellSolution, divergence_form_transform};
use crate::coeff::{builtin, cordes_check, Coefficient};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::macroprob::{
    drain_manifests, solve_fine_scale, solve_homogenized_h2, FineScaleOpts,
};
use crate::mesh::{unit_square_mesh, Pattern};
use crate::oracle::{oracle_y1_only, KnownU0};
use crate::quad::integrate_1d_split;
use crate::recon::{corrector_error_report, reconstruct, ErrorReport};
use crate::study::{run_study, StudyConfig};

#[derive(Parser)]
#[command(
    name = "homfem",
    about = "Finite element homogenization of nondivergence-form problems A(x/eps):D^2 u = f",
    long_about = None,
    version,
    after_help = "CSV schemas:\n  \
        study invariant_measure:  h,m_l2,eoc_m_l2\n  \
        study homogenized_matrix: h,a0_max,eoc_a0_max\n  \
        study lift:               h,v_h1,eoc_v_h1,z_l2,eoc_z_l2\n  \
        study u0_h2:              k,u0_h1,eoc_u0_h1,u0_h2,eoc_u0_h2\n  \
        study corrector_error:    epsilon,h1,eoc_h1,squared_total,eoc_squared_total\n  \
        study plateau:            k,squared_total,eoc_squared_total,adjusted,eoc_adjusted\n  \
        study nonuniform:         k,a0_node_max,eoc_a0_node_max,u0_h2,eoc_u0_h2\n  \
        reconstruct:              epsilon,h_cell,k_macro,h1_err,e11,e12,e22,l1_e11,l1_e12,l1_e22,squared_total\n\n\
        Exit codes: 0 success, 2 config error, 3 solver failure."
)]
struct Cli {
    /// Study configuration file (TOML), used by `study`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/export artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed recorded with outputs; overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ProblemArgs {
    /// Builtin coefficient name, e.g. arcsin_kink, sep_diag(2), xdep_diag.
    #[arg(long)]
    problem: String,
    /// Cell mesh resolution (1/h).
    #[arg(long, default_value_t = 64)]
    n: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the periodic cell problem: invariant measure, homogenized
    /// matrix, correctors (and optionally Hessian lifts).
    Cell {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Also compute the corrector Hessian lifts.
        #[arg(long)]
        hessians: bool,
    },
    /// Compute and print the homogenized matrix only.
    Homogenize {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Solve one corrector and write its sampled values.
    Corrector {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Entry: 11, 12, or 22.
        #[arg(long, default_value = "11")]
        ij: String,
    },
    /// Fine-scale HCT reference solve of A(x/eps):D^2 u = f with the
    /// manufactured right-hand side (known polynomial macro solution).
    SolveEps {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        epsilon: f64,
        /// Cell resolution for the homogenized matrix entering f.
        #[arg(long, default_value_t = 128)]
        cell_n: usize,
    },
    /// Full reconstruction pipeline for one epsilon; prints the error report.
    Reconstruct {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        epsilon: f64,
        /// Macro mesh resolution for the H2 homogenized solve.
        #[arg(long, default_value_t = 32)]
        macro_n: usize,
    },
    /// Run a config-driven convergence study (requires --config).
    Study,
    /// Print closed-form/quadrature oracle values at full precision.
    Oracle {
        #[arg(long)]
        problem: String,
    },
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_)
                | Error::InvalidArgument(_)
                | Error::Lookup(_)
                | Error::Parse { .. }
                | Error::Io(_) => 2,
                _ => 3,
            }
        }
    }
}

fn cell_coefficient(name: &str) -> Result<crate::coeff::CellCoefficient> {
    match builtin(name)? {
        Coefficient::Cell(c) => Ok(c),
        Coefficient::Macro(_) => Err(Error::InvalidArgument(format!(
            "{name} is x-dependent; this stage needs a pure cell coefficient"
        ))),
    }
}

fn solve_cell(problem: &ProblemArgs, hessians: bool) -> Result<CellSolution> {
    let a = cell_coefficient(&problem.problem)?;
    let mesh = Arc::new(unit_square_mesh(problem.n, Pattern::CrissCross)?);
    CellSolution::solve(&a, mesh, hessians)
}

fn print_a0(sol: &CellSolution) {
    println!("h = {:.6e}", sol.mesh_h);
    for i in 0..2 {
        for j in 0..2 {
            println!("a0_{}{} = {:.12e}", i + 1, j + 1, sol.a0_h.entries[i][j]);
        }
    }
}

fn write_manifests(out: Option<&Path>) -> Result<()> {
    let records = drain_manifests();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?);
            text.push('\n');
        }
        fs::write(dir.join("manifests.jsonl"), text)?;
    }
    Ok(())
}

fn manufactured_rhs(a: &crate::coeff::CellCoefficient, cell_n: usize) -> Result<(crate::geom::Mat2, impl Fn(Vec2) -> f64 + Sync)> {
    let mesh = Arc::new(unit_square_mesh(cell_n, Pattern::CrissCross)?);
    let sol = CellSolution::solve(a, mesh, false)?;
    let a0 = sol.a0_h.entries;
    Ok((a0, KnownU0::rhs(move |_| a0)))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match &cli.cmd {
        Cmd::Cell { problem, hessians } => {
            let sol = solve_cell(problem, *hessians)?;
            print_a0(&sol);
            let a = cell_coefficient(&problem.problem)?;
            let mesh = sol.m_h.space.mesh.clone();
            let pairing = sol.m_h.space.pairing.clone().ok_or_else(|| {
                Error::Capability("cell space lost its periodic pairing".into())
            })?;
            let transform = divergence_form_transform(&a, &sol.m_h, &mesh, &pairing)?;
            println!("divergence_transform_skewness = {:.3e}", transform.skewness);
            println!("divergence_residual = {:.3e}", transform.divergence_residual);
            if let Some(dir) = out {
                fs::create_dir_all(dir)?;
                let mut buf = Vec::new();
                sol.export(&mut buf, "cell")?;
                fs::write(dir.join("cell.txt"), buf)?;
            }
            Ok(())
        }
        Cmd::Homogenize { problem } => {
            let sol = solve_cell(problem, false)?;
            print_a0(&sol);
            if let Some(dir) = out {
                fs::create_dir_all(dir)?;
                let mut text = String::from("i,j,a0\n");
                for i in 0..2 {
                    for j in 0..2 {
                        text.push_str(&format!("{},{},{:.17e}\n", i + 1, j + 1, sol.a0_h.entries[i][j]));
                    }
                }
                fs::write(dir.join("a0.csv"), text)?;
            }
            Ok(())
        }
        Cmd::Corrector { problem, ij } => {
            let (i, j) = match ij.as_str() {
                "11" => (0, 0),
                "12" | "21" => (0, 1),
                "22" => (1, 1),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "corrector entry must be 11, 12, or 22, got {other}"
                    )))
                }
            };
            let sol = solve_cell(problem, false)?;
            let chi = sol.corrector(i, j);
            let mut buf = Vec::new();
            chi.sample_csv(&mut buf, 64)?;
            if let Some(dir) = out {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(format!("chi_{ij}.csv")), &buf)?;
            } else {
                print!("{}", String::from_utf8_lossy(&buf));
            }
            Ok(())
        }
        Cmd::SolveEps {
            problem,
            epsilon,
            cell_n,
        } => {
            let a = cell_coefficient(&problem.problem)?;
            let (a0, f) = manufactured_rhs(&a, *cell_n)?;
            println!("a0 used for f: {:?}", a0);
            let mesh = Arc::new(unit_square_mesh(problem.n, Pattern::CrissCross)?);
            let u = solve_fine_scale(&a, *epsilon, &f, mesh, &FineScaleOpts::default())?;
            println!("dofs = {}", u.space.n_dofs);
            println!("u(0.5, 0.5) = {:.12e}", u.eval([0.5, 0.5], 0)?.0);
            if let Some(dir) = out {
                fs::create_dir_all(dir)?;
                let mut buf = Vec::new();
                u.sample_csv(&mut buf, 256)?;
                fs::write(dir.join("u_eps.csv"), buf)?;
            }
            write_manifests(out)
        }
        Cmd::Reconstruct {
            problem,
            epsilon,
            macro_n,
        } => {
            let a = cell_coefficient(&problem.problem)?;
            let cell_mesh = Arc::new(unit_square_mesh(problem.n, Pattern::CrissCross)?);
            let cell = Arc::new(CellSolution::solve(&a, cell_mesh, true)?);
            let a0 = cell.a0_h.entries;
            let f = KnownU0::rhs(move |_| a0);
            let macro_mesh = Arc::new(unit_square_mesh(*macro_n, Pattern::CrissCross)?);
            let u0 = solve_homogenized_h2(a0, &f, macro_mesh)?;
            let fine_n = ((8.0 / epsilon).ceil() as usize).max(*macro_n);
            let fine_mesh = Arc::new(unit_square_mesh(fine_n, Pattern::Diagonal)?);
            let u_eps = solve_fine_scale(&a, *epsilon, &f, fine_mesh, &FineScaleOpts::default())?;
            let r = reconstruct(u0, cell, *epsilon)?;
            let rep = corrector_error_report(&u_eps, &r, 4, 2)?;
            let mut buf = Vec::new();
            buf.extend_from_slice(ErrorReport::CSV_HEADER.as_bytes());
            buf.push(b'\n');
            rep.csv_row(&mut buf)?;
            print!("{}", String::from_utf8_lossy(&buf));
            if let Some(dir) = out {
                fs::create_dir_all(dir)?;
                fs::write(dir.join("reconstruct.csv"), buf)?;
            }
            write_manifests(out)
        }
        Cmd::Study => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| Error::Config("study requires --config FILE".into()))?;
            let text = fs::read_to_string(path)?;
            let mut cfg = StudyConfig::from_toml(&text)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let result = run_study(&cfg, out)?;
            result.table.print();
            for p in &result.csv_paths {
                eprintln!("wrote {}", p.display());
            }
            write_manifests(out)
        }
        Cmd::Oracle { problem } => {
            match builtin(problem)? {
                Coefficient::Cell(a) => {
                    let o = oracle_y1_only(&a)?;
                    for i in 0..2 {
                        for j in 0..2 {
                            println!("a0_{}{} = {:.15e}", i + 1, j + 1, o.a0[i][j]);
                        }
                    }
                    let mass = integrate_1d_split(
                        &|t| (o.m_exact)([t, 0.0]),
                        &[0.0, 0.5, 1.0],
                        1e-13,
                    );
                    println!("integral_m = {:.15e}", mass);
                    let cordes = cordes_check(&a, 128)?;
                    println!("cordes_delta = {:.15e}", cordes.delta);
                }
                Coefficient::Macro(mac) => {
                    for &x in &[[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]] {
                        let o = crate::oracle::oracle_diag_product(&mac, x)?;
                        println!(
                            "x = ({:.2}, {:.2}): a0_11 = {:.15e}, a0_22 = {:.15e}",
                            x[0], x[1], o.a0[0][0], o.a0[1][1]
                        );
                    }
                }
            }
            Ok(())
        }
    }
}
