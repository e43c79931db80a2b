//! Command-line driver. Every subcommand reads an optional TOML or JSON
//! config, applies flag overrides on top, and writes a run directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::experiments::{
    mesh_artifacts, run_ball_removal, run_bound_audit, run_degeneration, run_density_jump, run_optimize, run_spectrum,
    AuditConfig, BallRemovalConfig, DegenerationSchedule, DensityJumpConfig, ExperimentRun, OptimizeConfig,
    SpectrumConfig, SurfaceSource, WORKERS_ENV,
};
use crate::spectrum::{brute_force, combine_disjoint, degeneration_limit, CompositionTable};

#[derive(Parser, Debug)]
#[command(name = "steklov", version, about = "Steklov spectra, conformal eigenvalue optimization and degeneration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML or JSON config file (by extension).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Override any config key: `--set optimizer.seed=3`. Values are parsed
    /// as JSON when possible, else taken as strings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for grid points.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct SurfaceFlags {
    /// `name[:p1[,p2]]`, e.g. `disc`, `cylinder:1`, `rectangle:3.14159,1`.
    #[arg(long)]
    shape: Option<String>,
    #[arg(long = "refine")]
    refinement: Option<u32>,
    /// OFF mesh instead of a model shape.
    #[arg(long = "mesh")]
    mesh_file: Option<String>,
    /// Density dump for the mesh.
    #[arg(long = "density")]
    density_file: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a mesh and write it with its boundary partition.
    Mesh {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surface: SurfaceFlags,
    },
    /// Steklov or mixed spectrum at a fixed density.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surface: SurfaceFlags,
        /// Largest eigenvalue index.
        #[arg(long = "k")]
        k_max: Option<usize>,
        #[arg(long)]
        export_matrices: bool,
    },
    /// Maximize sigma_bar_k over boundary densities.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        surface: SurfaceFlags,
        /// Comma-separated eigenvalue indices.
        #[arg(long = "k", value_delimiter = ',')]
        k_list: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Conformal suprema along a degenerating family.
    Degenerate {
        #[command(flatten)]
        common: Common,
        /// cylinder, moebius or collar.
        #[arg(long)]
        family: Option<String>,
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        /// to-zero or to-infinity; inferred from the grid order if absent.
        #[arg(long)]
        direction: Option<String>,
        #[arg(long = "k", value_delimiter = ',')]
        k_list: Vec<usize>,
        #[arg(long = "refine")]
        refinement: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Remove a shrinking ball with a Neumann condition from the disc.
    BallRemoval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
        #[arg(long = "k")]
        k_max: Option<usize>,
        #[arg(long = "refine")]
        refinement: Option<u32>,
    },
    /// Cylinder with the density dropping to delta on the lower half.
    DensityJump {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long = "k")]
        k_max: Option<usize>,
        #[arg(long = "refine")]
        refinement: Option<u32>,
    },
    /// Check the topological upper bounds on random densities.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Repeatable shape spec.
        #[arg(long = "shape")]
        shapes: Vec<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long = "k")]
        k_max: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "refine")]
        refinement: Option<u32>,
    },
    /// Evaluate the degeneration limit of user tables, cross-checked by
    /// exhaustive enumeration.
    Limits {
        /// JSON: `{"component_tables": [[0, ...], ...], "disc_count": n}` or a
        /// bare array of tables.
        #[arg(long)]
        tables: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        discs: Option<usize>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Audit(String),
    Runtime(String),
}

type Outcome<T> = Result<T, Failure>;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let mut inner = &e;
        while let Error::AtParameter { source, .. } = inner {
            inner = source;
        }
        match inner {
            Error::InvalidParameter(_) | Error::Parse { .. } | Error::Json(_) => Failure::Usage(e.to_string()),
            Error::BoundViolation { .. } => Failure::Audit(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

/// Parses `name[:p1[,p2]]` into the tagged JSON form of a shape.
pub fn shape_value(spec: &str) -> Result<Value, String> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, p.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{spec}: {e}"))).collect::<Result<Vec<_>, _>>()?),
        None => (spec, Vec::new()),
    };
    let need = |keys: &[&str], defaults: &[f64]| -> Result<Map<String, Value>, String> {
        if params.len() > keys.len() {
            return Err(format!("{spec}: too many parameters"));
        }
        let mut m = Map::new();
        for (i, key) in keys.iter().enumerate() {
            let v = params.get(i).copied().or(defaults.get(i).copied()).ok_or_else(|| format!("{spec}: missing {key}"))?;
            m.insert(key.to_string(), json!(v));
        }
        Ok(m)
    };
    let mut m = match name {
        "disc" | "half-disc" => need(&[], &[])?,
        "annulus" | "neumann-hole-annulus" => need(&["inner"], &[0.5])?,
        "cylinder" => need(&["height"], &[1.0])?,
        "moebius" => need(&["modulus"], &[1.0])?,
        "rectangle" => need(&["length", "depth"], &[std::f64::consts::PI, 1.0])?,
        "notched-disc" => need(&["epsilon"], &[0.1])?,
        "collar" => {
            let mut m = need(&["geodesic_length", "fraction"], &[1.0, 0.8])?;
            m.insert("strip".into(), json!("boundary-collar"));
            m
        }
        _ => return Err(format!("unknown shape {name}")),
    };
    m.insert("kind".into(), json!(name));
    Ok(Value::Object(m))
}

fn load_config(path: Option<&Path>) -> Outcome<Value> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let value: Value = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        Some("json") => serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        _ => return Err(Failure::Usage(format!("{}: config must be .toml or .json", path.display()))),
    };
    if !value.is_object() {
        return Err(Failure::Usage("config must be a table".into()));
    }
    Ok(value)
}

/// Sets `path` (dot-separated) in a JSON object, creating tables on the way.
fn set_path(root: &mut Value, path: &str, v: Value) -> Outcome<()> {
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| Failure::Usage(format!("{path}: {key} is not inside a table")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), v);
            return Ok(());
        }
        cur = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn apply_overrides(config: &mut Value, overrides: &[String]) -> Outcome<()> {
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| Failure::Usage(format!("--set {o}: expected KEY=VALUE")))?;
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(config, key, v)?;
    }
    Ok(())
}

fn decode<T: DeserializeOwned>(config: Value) -> Outcome<T> {
    serde_json::from_value(config).map_err(|e| Failure::Usage(format!("invalid config: {e}")))
}

fn surface_overrides(config: &mut Value, s: &SurfaceFlags) -> Outcome<()> {
    if let Some(spec) = &s.shape {
        set_path(config, "shape", shape_value(spec).map_err(Failure::Usage)?)?;
    }
    if let Some(r) = s.refinement {
        set_path(config, "refinement", json!(r))?;
    }
    if let Some(m) = &s.mesh_file {
        set_path(config, "mesh_file", json!(m))?;
    }
    if let Some(d) = &s.density_file {
        set_path(config, "density_file", json!(d))?;
    }
    Ok(())
}

fn set_some<T: serde::Serialize>(config: &mut Value, key: &str, v: Option<T>) -> Outcome<()> {
    match v {
        Some(v) => set_path(config, key, json!(v)),
        None => Ok(()),
    }
}

fn set_nonempty<T: serde::Serialize>(config: &mut Value, key: &str, v: &[T]) -> Outcome<()> {
    if v.is_empty() {
        return Ok(());
    }
    set_path(config, key, json!(v))
}

fn finish(run: ExperimentRun, out: PathBuf) -> Outcome<()> {
    let dir = run.persist(&out)?;
    print!("{}", run.report_csv());
    for l in &run.limits {
        println!(
            "# k={} predicted {} endpoint {} richardson {}",
            l.k,
            l.predicted,
            l.endpoint,
            l.richardson.map_or("n/a".to_string(), |r| r.to_string())
        );
    }
    for n in &run.notes {
        eprintln!("note: {n}");
    }
    eprintln!("run directory: {}", dir.display());
    Ok(())
}

fn prepare(common: &Common, name: &str) -> Outcome<(Value, PathBuf)> {
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Failure::Usage("--workers must be positive".into()));
        }
        std::env::set_var(WORKERS_ENV, w.to_string());
    }
    let config = load_config(common.config.as_deref())?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("runs").join(name));
    Ok((config, out))
}

fn limits(tables: &Path, k: usize, discs: Option<usize>) -> Outcome<()> {
    let text = std::fs::read_to_string(tables).map_err(|e| Failure::Usage(format!("{}: {e}", tables.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", tables.display())))?;
    let (component_tables, disc_count): (Vec<Vec<f64>>, usize) = match value {
        Value::Array(_) => (decode(value)?, 0),
        other => {
            let t: CompositionTable = decode(other)?;
            (t.component_tables, t.disc_count)
        }
    };
    let table = CompositionTable::new(component_tables, discs.unwrap_or(disc_count))?;
    let dp = degeneration_limit(&table, k)?;
    let brute = brute_force(&table, k, false)?;
    println!("degeneration_limit k={k} discs={} value={dp} brute_force={brute}", table.disc_count);
    if table.components() > 0 {
        match (combine_disjoint(&table, k), brute_force(&table, k, true)) {
            (Ok(a), Ok(b)) => {
                println!("combine_disjoint k={k} value={a} brute_force={b}");
                if a != b {
                    return Err(Failure::Runtime(format!("disjoint evaluator disagrees with enumeration: {a} vs {b}")));
                }
            }
            (Err(_), Err(_)) => println!("combine_disjoint k={k} not representable"),
            (a, b) => return Err(Failure::Runtime(format!("disjoint evaluator disagrees with enumeration: {a:?} vs {b:?}"))),
        }
    }
    if dp != brute {
        return Err(Failure::Runtime(format!("limit evaluator disagrees with enumeration: {dp} vs {brute}")));
    }
    Ok(())
}

fn execute(command: Command) -> Outcome<()> {
    match command {
        Command::Mesh { common, surface } => {
            let (mut config, out) = prepare(&common, "mesh")?;
            surface_overrides(&mut config, &surface)?;
            apply_overrides(&mut config, &common.overrides)?;
            let source: SurfaceSource = decode(config)?;
            finish(mesh_artifacts(&source)?, out)
        }
        Command::Spectrum { common, surface, k_max, export_matrices } => {
            let (mut config, out) = prepare(&common, "spectrum")?;
            surface_overrides(&mut config, &surface)?;
            set_some(&mut config, "k_max", k_max)?;
            if export_matrices {
                set_path(&mut config, "export_matrices", json!(true))?;
            }
            apply_overrides(&mut config, &common.overrides)?;
            let cfg: SpectrumConfig = decode(config)?;
            finish(run_spectrum(&cfg)?, out)
        }
        Command::Optimize { common, surface, k_list, seed, max_iters } => {
            let (mut config, out) = prepare(&common, "optimize")?;
            surface_overrides(&mut config, &surface)?;
            set_nonempty(&mut config, "k_list", &k_list)?;
            set_some(&mut config, "optimizer.seed", seed)?;
            set_some(&mut config, "optimizer.max_iters", max_iters)?;
            apply_overrides(&mut config, &common.overrides)?;
            let cfg: OptimizeConfig = decode(config)?;
            finish(run_optimize(&cfg)?, out)
        }
        Command::Degenerate { common, family, grid, direction, k_list, refinement, seed } => {
            let (mut config, out) = prepare(&common, "degenerate")?;
            set_some(&mut config, "family", family)?;
            set_nonempty(&mut config, "parameter_grid", &grid)?;
            set_some(&mut config, "direction", direction)?;
            set_nonempty(&mut config, "k_list", &k_list)?;
            set_some(&mut config, "refinement", refinement)?;
            set_some(&mut config, "optimizer.seed", seed)?;
            apply_overrides(&mut config, &common.overrides)?;
            if config.get("direction").is_none() {
                let grid: Vec<f64> = config.get("parameter_grid").cloned().map(decode).transpose()?.unwrap_or_default();
                let inferred = if grid.windows(2).all(|w| w[1] < w[0]) { "to-zero" } else { "to-infinity" };
                set_path(&mut config, "direction", json!(inferred))?;
            }
            if config.get("k_list").is_none() {
                set_path(&mut config, "k_list", json!([1]))?;
            }
            let schedule: DegenerationSchedule = decode(config)?;
            finish(run_degeneration(&schedule)?, out)
        }
        Command::BallRemoval { common, radii, k_max, refinement } => {
            let (mut config, out) = prepare(&common, "ball-removal")?;
            set_nonempty(&mut config, "radius_grid", &radii)?;
            set_some(&mut config, "k_max", k_max)?;
            set_some(&mut config, "refinement", refinement)?;
            apply_overrides(&mut config, &common.overrides)?;
            let cfg: BallRemovalConfig = decode(config)?;
            finish(run_ball_removal(&cfg)?, out)
        }
        Command::DensityJump { common, deltas, k_max, refinement } => {
            let (mut config, out) = prepare(&common, "density-jump")?;
            set_nonempty(&mut config, "delta_grid", &deltas)?;
            set_some(&mut config, "k_max", k_max)?;
            set_some(&mut config, "refinement", refinement)?;
            apply_overrides(&mut config, &common.overrides)?;
            let cfg: DensityJumpConfig = decode(config)?;
            finish(run_density_jump(&cfg)?, out)
        }
        Command::Audit { common, shapes, trials, k_max, seed, refinement } => {
            let (mut config, out) = prepare(&common, "audit")?;
            if !shapes.is_empty() {
                let v = shapes.iter().map(|s| shape_value(s)).collect::<Result<Vec<_>, _>>().map_err(Failure::Usage)?;
                set_path(&mut config, "shapes", Value::Array(v))?;
            }
            set_some(&mut config, "trials", trials)?;
            set_some(&mut config, "k_max", k_max)?;
            set_some(&mut config, "seed", seed)?;
            set_some(&mut config, "refinement", refinement)?;
            apply_overrides(&mut config, &common.overrides)?;
            let cfg: AuditConfig = decode(config)?;
            let report = run_bound_audit(&cfg)?;
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            std::fs::write(out.join("config.json"), serde_json::to_string_pretty(&cfg).map_err(Error::from)? + "\n")
                .map_err(Error::from)?;
            report.persist(&out)?;
            print!("{}", report.to_csv());
            for n in &report.notes {
                eprintln!("note: {n}");
            }
            eprintln!("run directory: {}", out.display());
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Audit(format!("{} bound violations; bundles under {}", report.violations.len(), out.join("violations").display())))
            }
        }
        Command::Limits { tables, k, discs } => limits(&tables, k, discs),
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code:
/// 0 on success, 1 on an audit failure or a numerical failure, 2 on a usage
/// or config error.
pub fn cli_main<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Audit(m)) => {
            eprintln!("audit failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
