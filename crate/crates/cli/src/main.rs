use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use ssd_core::io::{read_grid, write_grid};
use ssd_core::{Census, Coupling, LandGrid, Mode, Scenario, SimError, SimulationRecord};

mod compare;
mod output;

use output::{write_run_dir, Meta};

/// Spatial Daisyworld simulations: single runs, seed ensembles, resolution
/// sweeps, landscape generation and record comparison.
#[derive(Parser)]
#[command(name = "ssd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write records.csv, snapshots and meta.txt.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Start from this landscape instead of generating one.
        #[arg(long)]
        landscape: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run seeds 1..=K into seed_<i> directories and write summary.csv.
    Ensemble {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the scenario at several cell sizes on the same landscape and
    /// write sweep.csv.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Cell sizes in metres, e.g. 100,50,25,12.5.
        #[arg(long, value_delimiter = ',', required = true)]
        resolutions: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Coarse landscape to subdivide; generated at the coarsest
        /// resolution when absent.
        #[arg(long)]
        refine_from: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u32>,
    },
    /// Write a random landscape with exact cell counts.
    Genland {
        /// fertile=N,black=N,white=N,barren=N
        #[arg(long)]
        counts: String,
        /// RxC
        #[arg(long)]
        shape: String,
        #[arg(long)]
        cellsize: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two CSV files column by column.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long)]
    cell_size: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    /// Unreadable or invalid input.
    Input(String),
    /// The simulation or an output write failed.
    Runtime(String),
    /// compare found differences.
    Different,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Input(_) => 1,
            Self::Runtime(_) => 2,
            Self::Different => 3,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn input<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Input(format!("{context}: {e}"))
}

fn runtime<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Runtime(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            landscape,
            overrides,
        } => cmd_run(&scenario, &out, seed, landscape.as_deref(), &overrides),
        Command::Ensemble {
            scenario,
            seeds,
            out,
            overrides,
        } => cmd_ensemble(&scenario, seeds, &out, &overrides),
        Command::Sweep {
            scenario,
            resolutions,
            out,
            seed,
            refine_from,
            steps,
        } => cmd_sweep(
            &scenario,
            &resolutions,
            &out,
            seed,
            refine_from.as_deref(),
            steps,
        ),
        Command::Genland {
            counts,
            shape,
            cellsize,
            seed,
            out,
        } => cmd_genland(&counts, &shape, cellsize, seed, &out),
        Command::Compare { a, b } => compare::run(&a, &b),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Input(msg) | Failure::Runtime(msg) => log::error!("{msg}"),
                Failure::Different => {}
            }
            ExitCode::from(failure.code())
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path).map_err(input(path.display()))?;
    Scenario::parse(&text).map_err(input(path.display()))
}

/// Applies command-line overrides and returns them as `key=value` notes.
fn apply_overrides(
    scenario: &mut Scenario,
    seed: Option<u64>,
    o: &Overrides,
) -> Result<Vec<String>, Failure> {
    let mut notes = Vec::new();
    if let Some(seed) = seed {
        scenario.seed = seed;
        notes.push(format!("seed={seed}"));
    }
    if let Some(mode) = o.mode {
        scenario.mode = mode;
        notes.push(format!("mode={}", mode_name(mode)));
    }
    if let Some(steps) = o.steps {
        scenario.steps = steps;
        notes.push(format!("steps={steps}"));
    }
    if let Some(cell) = o.cell_size {
        scenario.cell_size_m = cell;
        scenario.grid_shape = None;
        notes.push(format!("cell_size_m={cell}"));
    }
    scenario.validate().map_err(input("after overrides"))?;
    Ok(notes)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Spatial => "spatial",
        Mode::NonSpatial => "nonspatial",
    }
}

fn simulate(
    scenario: &Scenario,
    landscape: Option<LandGrid>,
) -> Result<ssd_core::RunOutput, SimError> {
    match landscape {
        Some(grid) => ssd_core::run_from_grid(scenario, grid),
        None => ssd_core::run(scenario),
    }
}

fn cmd_run(
    path: &Path,
    out: &Path,
    seed: Option<u64>,
    landscape: Option<&Path>,
    overrides: &Overrides,
) -> CmdResult {
    let mut scenario = load_scenario(path)?;
    let notes = apply_overrides(&mut scenario, seed, overrides)?;
    let grid = match landscape {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(input(p.display()))?;
            Some(read_grid(&text).map_err(input(p.display()))?)
        }
        None => None,
    };
    if let Some(g) = &grid {
        if scenario.mode != Mode::Spatial {
            return Err(Failure::Input(
                "--landscape needs a spatial scenario".into(),
            ));
        }
        scenario.areas = ssd_core::grid_areas(g);
        scenario.cell_size_m = g.cell_size_m();
        scenario.grid_shape = Some([g.nrows(), g.ncols()]);
    }
    log::info!(
        "running {} ({} steps, seed {})",
        scenario.name,
        scenario.steps,
        scenario.seed
    );
    let mut meta = Meta::new("run", &scenario, notes);
    if let Some(p) = landscape {
        meta.landscape = Some(p.display().to_string());
    }
    let output = simulate(&scenario, grid).map_err(runtime(&scenario.name))?;
    write_run_dir(out, &output, &meta)?;
    println!("records\t{}", out.join("records.csv").display());
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let threads = match std::env::var("SSD_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(input(format!("SSD_THREADS=`{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(runtime("thread pool"))
}

fn cmd_ensemble(path: &Path, seeds: u64, out: &Path, overrides: &Overrides) -> CmdResult {
    let mut base = load_scenario(path)?;
    let notes = apply_overrides(&mut base, None, overrides)?;
    let pool = thread_pool()?;
    let results: Vec<Result<Vec<SimulationRecord>, Failure>> = pool.install(|| {
        (1..=seeds)
            .into_par_iter()
            .map(|seed| {
                let mut scenario = base.clone();
                scenario.seed = seed;
                let mut notes = notes.clone();
                notes.push(format!("seed={seed}"));
                let meta = Meta::new("ensemble", &scenario, notes);
                let output = simulate(&scenario, None).map_err(runtime(format!("seed {seed}")))?;
                write_run_dir(&out.join(format!("seed_{seed}")), &output, &meta)?;
                log::info!("seed {seed} done");
                Ok(output.records)
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    for (seed, result) in (1..=seeds).zip(results) {
        rows.push((seed, result?));
    }
    let summary = out.join("summary.csv");
    output::write_summary(&summary, &rows)?;
    println!("summary\t{}", summary.display());
    Ok(())
}

/// Integer subdivision factor taking `base` metre cells to `target`.
fn refinement_factor(base: f64, target: f64) -> Option<usize> {
    let k = base / target;
    let rounded = k.round();
    (rounded >= 1.0 && (k - rounded).abs() <= 1e-9 * k).then_some(rounded as usize)
}

fn resolution_label(r: f64) -> String {
    format!("{r}")
}

fn cmd_sweep(
    path: &Path,
    resolutions: &[f64],
    out: &Path,
    seed: Option<u64>,
    refine_from: Option<&Path>,
    steps: Option<u32>,
) -> CmdResult {
    let mut base = load_scenario(path)?;
    let overrides = Overrides {
        steps,
        ..Overrides::default()
    };
    let notes = apply_overrides(&mut base, seed, &overrides)?;
    if base.mode != Mode::Spatial {
        return Err(Failure::Input("sweep needs a spatial scenario".into()));
    }
    if let Some(bad) = resolutions.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Failure::Input(format!(
            "resolution {bad} must be a positive cell size"
        )));
    }
    let coarse = match refine_from {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(input(p.display()))?;
            read_grid(&text).map_err(input(p.display()))?
        }
        None => {
            let mut s = base.clone();
            s.cell_size_m = resolutions.iter().copied().fold(f64::MIN, f64::max);
            Coupling::initialize(&s)
                .map_err(runtime(format!("landscape at {} m", s.cell_size_m)))?
                .grid()
                .clone()
        }
    };
    if refine_from.is_some() {
        base.areas = ssd_core::grid_areas(&coarse);
    }
    let pool = thread_pool()?;
    let results: Vec<Result<Vec<SimulationRecord>, String>> = pool.install(|| {
        resolutions
            .par_iter()
            .map(|&r| {
                let label = resolution_label(r);
                let mut scenario = base.clone();
                scenario.cell_size_m = r;
                scenario.grid_shape = None;
                ssd_core::orchestrator::cell_counts(&scenario.areas, r)
                    .map_err(|e| e.to_string())?;
                let k = refinement_factor(coarse.cell_size_m(), r).ok_or_else(|| {
                    format!(
                        "{r} m is not an integer subdivision of the {} m base landscape",
                        coarse.cell_size_m()
                    )
                })?;
                let grid = coarse.refine(k).map_err(|e| e.to_string())?;
                scenario.areas = ssd_core::grid_areas(&grid);
                let dir = out.join(format!("res_{label}"));
                std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
                let landscape = dir.join("landscape.asc");
                std::fs::write(&landscape, write_grid(&grid))
                    .map_err(|e| format!("{}: {e}", landscape.display()))?;
                let mut notes = notes.clone();
                notes.push(format!("cell_size_m={r}"));
                notes.push(format!("refinement={k}"));
                let mut meta = Meta::new("sweep", &scenario, notes);
                meta.landscape = Some("landscape.asc".into());
                let output = ssd_core::run_from_grid(&scenario, grid).map_err(|e| e.to_string())?;
                write_run_dir(&dir, &output, &meta).map_err(|f| format!("{f:?}"))?;
                log::info!("{label} m done");
                Ok(output.records)
            })
            .collect()
    });
    let mut columns = Vec::new();
    let mut failed = 0;
    for (&r, result) in resolutions.iter().zip(results) {
        match result {
            Ok(records) => columns.push((resolution_label(r), records)),
            Err(msg) => {
                failed += 1;
                log::error!("resolution {r} m: {msg}");
            }
        }
    }
    let sweep = out.join("sweep.csv");
    std::fs::create_dir_all(out).map_err(runtime(out.display()))?;
    output::write_sweep(&sweep, &columns)?;
    println!("sweep\t{}", sweep.display());
    if failed > 0 {
        return Err(Failure::Runtime(format!(
            "{failed} of {} resolutions failed",
            resolutions.len()
        )));
    }
    Ok(())
}

fn parse_counts(text: &str) -> Result<Census, Failure> {
    let mut census = Census::default();
    let mut seen = [false; 4];
    for part in text.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            Failure::Input(format!("--counts: expected name=count, got `{part}`"))
        })?;
        let code = ssd_core::LandCode::ALL
            .into_iter()
            .find(|c| c.name() == key.trim())
            .ok_or_else(|| Failure::Input(format!("--counts: unknown land code `{key}`")))?;
        let n = value
            .trim()
            .parse()
            .map_err(input(format!("--counts: {key}")))?;
        census.set(code, n);
        seen[code as usize] = true;
    }
    if let Some(missing) = ssd_core::LandCode::ALL
        .into_iter()
        .find(|c| !seen[*c as usize])
    {
        return Err(Failure::Input(format!("--counts: missing `{missing}`")));
    }
    Ok(census)
}

fn parse_shape(text: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Input(format!("--shape: expected RxC, got `{text}`"));
    let (r, c) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

fn cmd_genland(counts: &str, shape: &str, cellsize: f64, seed: u64, out: &Path) -> CmdResult {
    let counts = parse_counts(counts)?;
    let (nrows, ncols) = parse_shape(shape)?;
    let grid =
        LandGrid::generate(counts, nrows, ncols, cellsize, seed).map_err(input("genland"))?;
    std::fs::write(out, write_grid(&grid)).map_err(runtime(out.display()))?;
    let census = grid.census();
    for code in ssd_core::LandCode::ALL {
        println!("{}\t{}", code.name(), census.get(code));
    }
    Ok(())
}
