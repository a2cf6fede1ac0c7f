use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use viewplan::mesh::{self, load_mesh, MeshError, PlyScene, TriangleMesh};
use viewplan::planner::{self, PlanConfig, PlanError};
use viewplan::solver::{self, GaParams, ScpInstance, SolveResult, SolverError};
use viewplan::spectral::{cluster_mesh, ClusterParams, SpectralError};
use viewplan::synthetic;
use viewplan::visibility::{VisibilityError, VisibilityMatrix};

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "viewplan", version, about = "Viewpoint planning for 3D surface inspection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a viewpoint set for a mesh.
    Plan {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Proposed pipeline against the random-sampling baseline over repeated seeds.
    Compare {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Solve a set covering instance stored as a bit-matrix file.
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = Algo::Gahh)]
        algo: Algo,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_generations: Option<usize>,
        /// Where to write the per-generation history CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Spectral clustering of a whole mesh, written as a colored PLY.
    Cluster {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 0.35)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Subdivide first so no triangle exceeds this area.
        #[arg(long)]
        max_area: Option<f64>,
        #[arg(long, default_value = "clusters.ply")]
        out: PathBuf,
    },
    /// Write one of the built-in synthetic meshes as OBJ.
    Synth {
        #[arg(long)]
        shape: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Gahh,
    Ga,
    Greedy,
    Exact,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

fn solver_code(e: &SolverError) -> u8 {
    match e {
        SolverError::InstanceInfeasible { .. } => EXIT_INFEASIBLE,
        SolverError::DimensionMismatch { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let code = match &e {
            PlanError::Config(_) | PlanError::Spectral(_) => EXIT_CONFIG,
            PlanError::Io { .. } | PlanError::Mesh(_) => EXIT_IO,
            PlanError::Solver(s) => solver_code(s),
            PlanError::NoProgress { .. } | PlanError::SamplingStarved { .. } => EXIT_INFEASIBLE,
        };
        Failure::new(code, e)
    }
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        let code = match e {
            MeshError::InvalidParameter(_) | MeshError::SubdivisionOverflow { .. } => EXIT_CONFIG,
            _ => EXIT_IO,
        };
        Failure::new(code, e)
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        Failure::new(solver_code(&e), e)
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        Failure::new(EXIT_CONFIG, e)
    }
}

impl From<VisibilityError> for Failure {
    fn from(e: VisibilityError) -> Self {
        Failure::new(EXIT_IO, e)
    }
}

type Outcome = Result<(), Failure>;

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    std::fs::write(path, contents).map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn out_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_IO, format!("cannot create {}: {e}", dir.display())))
}

fn read_mesh(path: &Path) -> Result<TriangleMesh, Failure> {
    let (mesh, report) = load_mesh(path, None)?;
    if report.dropped_degenerate > 0 {
        eprintln!("{}: dropped {} degenerate triangles", path.display(), report.dropped_degenerate);
    }
    Ok(mesh)
}

fn plan(mesh: &Path, config: &Path, seed: Option<u64>, out: &Path) -> Outcome {
    let mut cfg = PlanConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let start = Instant::now();
    let mesh = planner::prepare_mesh(&read_mesh(mesh)?, &cfg)?;
    let report = planner::plan(&mesh, &cfg)?;
    out_dir(out)?;
    write(&out.join("report.json"), report.to_json())?;
    write(&out.join("viewpoints.json"), planner::viewpoints_json(&report))?;
    write(&out.join("coverage.csv"), planner::coverage_csv(&mesh, &report))?;
    planner::export_visualization(&mesh, &report, out.join("visualization.ply"))?;
    let mut timing = report.timing;
    timing.total = start.elapsed().as_secs_f64();
    write(
        &out.join("timing.json"),
        serde_json::to_string_pretty(&timing).expect("timing serializes") + "\n",
    )?;
    println!(
        "{} viewpoints from {} candidates, coverage {:.4} of {} coverable triangles ({} uncoverable), {} outer iterations",
        report.viewpoints.len(),
        report.candidate_count,
        report.coverage_ratio,
        report.triangle_count - report.uncoverable.len(),
        report.uncoverable.len(),
        report.outer_iterations
    );
    if report.constraint_violations > 0 {
        eprintln!("warning: {} selected viewpoints violate d_safe or h_limit", report.constraint_violations);
    }
    Ok(())
}

fn compare(mesh: &Path, config: &Path, repeats: usize, out: &Path) -> Outcome {
    if repeats == 0 {
        return Err(Failure::new(EXIT_CONFIG, "--repeats must be >= 1"));
    }
    let cfg = PlanConfig::load(config)?;
    let mesh = planner::prepare_mesh(&read_mesh(mesh)?, &cfg)?;
    let cmp = planner::compare_methods(&mesh, &cfg, repeats)?;
    out_dir(out)?;
    write(&out.join("comparison.csv"), cmp.to_csv())?;
    write(&out.join("runs.csv"), cmp.runs_csv())?;
    write(&out.join("curve.csv"), cmp.curve_csv())?;
    write(&out.join("timing.csv"), cmp.timing_csv())?;
    for s in &cmp.summaries {
        println!(
            "{:>8}: {:.2} ± {:.2} viewpoints, coverage {:.4}, {:.1} candidates",
            s.method, s.selected_mean, s.selected_std, s.coverage_mean, s.candidates_mean
        );
    }
    Ok(())
}

fn solve(matrix: &Path, delta: f64, algo: Algo, seed: u64, max_generations: Option<usize>, history: Option<&Path>) -> Outcome {
    let a = VisibilityMatrix::read(matrix)?;
    let inst = ScpInstance::new(a, delta)?;
    let mut params = GaParams { seed, ..Default::default() };
    if let Some(g) = max_generations {
        params.max_generations = g;
    }
    let start = Instant::now();
    let result = match algo {
        Algo::Gahh => solver::ga_hh_solve(&inst, &params)?,
        Algo::Ga => solver::ga_solve(&inst, &params)?,
        Algo::Greedy => single(&inst, solver::greedy_cover(&inst)?),
        Algo::Exact => single(&inst, solver::brute_force_scp(&inst)?),
    };
    let secs = start.elapsed().as_secs_f64();
    if let Some(h) = history {
        write(h, solver::history_csv(&result))?;
    }
    let summary = serde_json::json!({
        "m": inst.m(),
        "n": inst.n(),
        "delta": delta,
        "size": result.size(),
        "fitness": result.best_fitness,
        "feasible": inst.is_feasible(&result.best),
        "iterations_to_best": result.iterations_to_best,
        "generations": result.generations,
        "selected": result.best.selected(),
        "seconds": secs,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn single(inst: &ScpInstance, best: solver::Solution) -> SolveResult {
    let f = solver::fitness(&best, inst);
    SolveResult {
        history: vec![f],
        history_sizes: vec![best.size()],
        best_fitness: f,
        best,
        iterations_to_best: 0,
        generations: 0,
    }
}

/// Distinct hues spaced by the golden angle.
fn cluster_color(c: usize) -> [u8; 3] {
    let h = (c as f64 * 0.618_033_988_75).fract() * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let s = |v: f64| (40.0 + 200.0 * v) as u8;
    [s(r), s(g), s(b)]
}

fn cluster(mesh: &Path, params: ClusterParams, max_area: Option<f64>, out: &Path) -> Outcome {
    let mut m = read_mesh(mesh)?;
    if let Some(a) = max_area {
        m = mesh::subdivide(&m, a)?;
    }
    params.validate()?;
    let all: Vec<usize> = (0..m.len()).collect();
    let assignment = cluster_mesh(&m, &all, &params)?;
    let scene = PlyScene::from_mesh(&m, "cluster", |t| {
        let c = assignment.labels[t];
        (cluster_color(c), c as i64)
    });
    write(out, scene.to_ply_string())?;
    println!("{} triangles in {} clusters -> {}", m.len(), assignment.k(), out.display());
    Ok(())
}

fn synth(shape: &str, out: &Path) -> Outcome {
    let mesh = synthetic::by_name(shape).ok_or_else(|| {
        Failure::new(
            EXIT_CONFIG,
            format!("unknown shape {shape:?}; expected one of {}", synthetic::SHAPES.join(", ")),
        )
    })?;
    mesh::write_obj(&mesh, out)?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Plan {
            mesh,
            config,
            seed,
            out_dir,
        } => plan(&mesh, &config, seed, &out_dir),
        Command::Compare {
            mesh,
            config,
            repeats,
            out_dir,
        } => compare(&mesh, &config, repeats, &out_dir),
        Command::Solve {
            matrix,
            delta,
            algo,
            seed,
            max_generations,
            history,
        } => solve(&matrix, delta, algo, seed, max_generations, history.as_deref()),
        Command::Cluster {
            mesh,
            k,
            theta,
            sigma,
            seed,
            max_area,
            out,
        } => {
            let params = ClusterParams {
                theta,
                sigma,
                k,
                seed,
                ..Default::default()
            };
            cluster(&mesh, params, max_area, &out)
        }
        Command::Synth { shape, out } => synth(&shape, &out),
        Command::DefaultConfig => {
            print!("{}", PlanConfig::default().to_toml_string());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
