//! The `fibernet` command-line tool.
//!
//! Settings come from an optional TOML file (`--config`) with the sections
//! `[network]`, `[assembly]`, `[multiscale]`, `[analysis]` and `[cli]`;
//! flags override individual keys. Each command writes its files into the
//! output directory and finishes by writing `manifest.json`.

mod config;
mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::{
    AnalysisSection, AssemblySection, CliSection, Config, Method, MultiscaleSection, NetworkSection, NetworkType,
    ProblemChoice,
};
pub use manifest::{prepare_output, RunManifest, MANIFEST_FILE, MANIFEST_FORMAT_VERSION};

use crate::analysis::{build_network, run_study, solve_reference, StreamSeeds, StudyConfig, STUDY_FORMAT_VERSION};
use crate::assembly::{assemble_stiffness, build_problem, write_system, AssemblyOptions, SYSTEM_FORMAT_VERSION};
use crate::multiscale::{run_lod, write_basis};
use crate::network::{read_network, write_network, Network, NETWORK_FORMAT_VERSION};
use crate::{Error, Result};

pub const THREADS_ENV: &str = "FIBERNET_THREADS";
pub const DISPLACEMENT_HEADER: &str = "node,x,y,ux,uy";
pub const DISPLACEMENT_FORMAT_VERSION: u32 = 1;
pub const SOLVE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "fibernet", version, about = "Fiber-network mechanics with a localized multiscale solver")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed of every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to FIBERNET_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// More log output on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only warnings and errors on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a network with coefficients and write it to network.json.
    Generate(GenerateArgs),
    /// Solve one boundary-value problem on a network file.
    Solve(SolveArgs),
    /// Run a convergence study over several coarse sizes.
    Study(StudyArgs),
    /// Print metadata of a file written by this tool.
    Info(InfoArgs),
}

#[derive(Debug, Default, Args)]
pub struct NetworkArgs {
    #[arg(long = "type", value_enum)]
    pub kind: Option<NetworkType>,
    /// Fine grid cells per side.
    #[arg(long)]
    pub m: Option<usize>,
    /// Domain side length.
    #[arg(long)]
    pub domain: Option<f64>,
    /// Node perturbation as a fraction of the grid spacing.
    #[arg(long)]
    pub magnitude: Option<f64>,
    /// Approximate node count of a fiber network.
    #[arg(long)]
    pub target_nodes: Option<usize>,
    /// Number of fibers (overrides --target-nodes).
    #[arg(long)]
    pub fiber_count: Option<usize>,
    #[arg(long)]
    pub fiber_length: Option<f64>,
    /// Straight segments per fiber.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Coefficient preset.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<crate::analysis::Preset>,
}

#[derive(Debug, Default, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
}

#[derive(Debug, Default, Args)]
pub struct SolveArgs {
    /// Network file (default: `[cli] network`).
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub problem: Option<ProblemChoice>,
    /// Coarse grid cells per side.
    #[arg(long)]
    pub m: Option<usize>,
    /// Localization factor c in ell = c·H·log(m).
    #[arg(long)]
    pub loc_factor: Option<f64>,
    /// Write the multiscale basis to basis.coo.
    #[arg(long)]
    pub dump_basis: bool,
    /// Write K, load and constraints to system.coo / system.json.
    #[arg(long)]
    pub export_system: bool,
}

#[derive(Debug, Default, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[arg(long, value_enum)]
    pub problem: Option<ProblemChoice>,
    /// Comma separated coarse sizes.
    #[arg(long, value_delimiter = ',')]
    pub coarse_sizes: Option<Vec<usize>>,
    /// Localization factor c in ell = c·H·log(m).
    #[arg(long)]
    pub loc_factor: Option<f64>,
    /// Record wall time per row.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub file: PathBuf,
}

fn parse_preset(s: &str) -> std::result::Result<crate::analysis::Preset, String> {
    serde_json::from_value(json!(s.replace('-', "_"))).map_err(|_| {
        format!("unknown preset `{s}` (unit, unit_random, stiff, fiber, fiber_random)")
    })
}

impl Cli {
    pub fn log_level(&self) -> log::LevelFilter {
        if self.quiet {
            return log::LevelFilter::Warn;
        }
        match self.verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    }
}

/// Runs a parsed command line; stdout receives machine-readable summaries.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    apply_global(&cli, &mut config);
    let threads = resolve_threads(cli.threads, std::env::var(THREADS_ENV).ok(), config.cli.threads)?;
    // summaries are buffered so that the worker pool never holds stdout
    let dispatch = move || -> Result<Vec<u8>> {
        let path = cli.config.as_deref();
        let mut buf = Vec::new();
        match cli.command {
            Command::Generate(a) => cmd_generate(config, path, &a, &mut buf),
            Command::Solve(a) => cmd_solve(config, path, &a, &mut buf),
            Command::Study(a) => cmd_study(config, path, &a, &mut buf),
            Command::Info(a) => cmd_info(&a.file, &mut buf),
        }?;
        Ok(buf)
    };
    let buf = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
            .install(dispatch)?,
        None => dispatch()?,
    };
    stdout
        .write_all(&buf)
        .and_then(|()| stdout.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn resolve_threads(flag: Option<usize>, env: Option<String>, config: Option<usize>) -> Result<Option<usize>> {
    let from_env = match env.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => Some(
            s.parse::<usize>()
                .map_err(|_| Error::invalid(THREADS_ENV, format!("not a thread count: `{s}`")))?,
        ),
        None => None,
    };
    let n = flag.or(from_env).or(config);
    if n == Some(0) {
        return Err(Error::invalid("threads", "must be at least 1"));
    }
    Ok(n)
}

fn apply_global(cli: &Cli, config: &mut Config) {
    if cli.seed.is_some() {
        config.cli.seed = cli.seed;
    }
    if cli.out.is_some() {
        config.cli.output = cli.out.clone();
    }
}

fn apply_network(a: &NetworkArgs, n: &mut NetworkSection) {
    fn set<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
        if src.is_some() {
            *dst = src.clone();
        }
    }
    set(&mut n.kind, &a.kind);
    set(&mut n.m_fine, &a.m);
    set(&mut n.domain_side, &a.domain);
    set(&mut n.magnitude, &a.magnitude);
    set(&mut n.target_nodes, &a.target_nodes);
    set(&mut n.fiber_count, &a.fiber_count);
    set(&mut n.fiber_length, &a.fiber_length);
    set(&mut n.segments_per_fiber, &a.segments);
    if a.preset.is_some() {
        n.preset = a.preset;
        n.coefficients = None;
    }
}

/// Prefixes a bare field name from the generators with the config section.
fn in_section(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } if !field.contains('.') => {
            Error::invalid(format!("{section}.{field}"), reason)
        }
        other => other,
    }
}

fn cmd_generate(mut config: Config, path: Option<&Path>, a: &GenerateArgs, out: &mut dyn std::io::Write) -> Result<()> {
    apply_network(&a.network, &mut config.network);
    let (spec, scheme) = config.network_spec()?;
    let seed = config.seed();
    let network = build_network(&spec, &scheme, seed).map_err(|e| in_section("network", e))?;
    let dir = config.output();
    prepare_output(&dir)?;
    write_network(&network, &dir.join("network.json"))?;
    log::info!(
        "wrote {}: {} nodes, {} edges, {} pairs",
        dir.join("network.json").display(),
        network.nodes.len(),
        network.edges.len(),
        network.pairs.len()
    );
    let mut manifest = RunManifest::new("generate", path);
    manifest.parameters = json!({ "network": spec, "coefficients": scheme, "seed": seed });
    manifest.seeds = Some(StreamSeeds::derive(seed));
    manifest.artifacts.push("network.json".into());
    manifest.format_versions.insert("network".into(), NETWORK_FORMAT_VERSION);
    manifest.write(&dir)?;
    let _ = writeln!(out, "nodes {}\nedges {}\npairs {}", network.nodes.len(), network.edges.len(), network.pairs.len());
    Ok(())
}

fn cmd_solve(mut config: Config, path: Option<&Path>, a: &SolveArgs, out: &mut dyn std::io::Write) -> Result<()> {
    if a.network.is_some() {
        config.cli.network = a.network.clone();
    }
    if a.method.is_some() {
        config.cli.method = a.method;
    }
    if a.problem.is_some() {
        config.assembly.problem = a.problem;
    }
    if a.m.is_some() {
        config.multiscale.m = a.m;
    }
    if a.loc_factor.is_some() {
        config.multiscale.loc_factor = a.loc_factor;
    }
    let method = config.cli.method.unwrap_or(Method::Lod);
    let problem = config.problem()?;
    let localization = config.localization()?;
    let m = config.coarse_m()?;
    let options = AssemblyOptions {
        asymmetry_bound: config.asymmetry_bound()?,
    };
    let input = config
        .cli
        .network
        .clone()
        .ok_or_else(|| Error::invalid("cli.network", "no network file given (use --network)"))?;
    // read before touching the output directory
    let network = read_network(&input)?;

    let dir = config.output();
    prepare_output(&dir)?;
    let stiffness = assemble_stiffness(&network, &options)?;
    let raw_asymmetry = stiffness.diagnostics.raw_asymmetry;
    let system = build_problem(&network, stiffness.matrix, &problem)?;
    let k_free = system.free_matrix();
    let mut manifest = RunManifest::new("solve", path);
    let mut summary = json!({
        "format_version": SOLVE_FORMAT_VERSION,
        "method": method,
        "problem": problem,
        "network": input,
        "nodes": network.nodes.len(),
        "dofs": system.dof_count(),
        "free_dofs": system.free.len(),
        "raw_asymmetry": raw_asymmetry,
    });
    let u = match method {
        Method::Exact => {
            let r = solve_reference(&system, &k_free)?;
            summary["relative_residual"] = json!(r.relative_residual);
            summary["refinement_steps"] = json!(r.refinement_steps);
            r.u
        }
        Method::Lod => {
            let run = run_lod(&network, &system, &k_free, m, &localization, config.coarse_boundary())?;
            summary["m"] = json!(m);
            summary["H"] = json!(run.grid.h);
            summary["ell"] = json!(run.basis.ell);
            summary["localization"] = json!(localization);
            summary["coarse_boundary"] = json!(config.coarse_boundary());
            summary["coarse_dofs"] = json!(run.basis.len());
            summary["coarse_asymmetry"] = json!(run.solution.coarse_asymmetry);
            if a.dump_basis {
                write_basis(&run.basis, &system, &dir.join("basis.coo"))?;
                manifest.artifacts.push("basis.coo".into());
            }
            run.solution.u
        }
    };
    let ku = system.k.mul_vec(&u);
    let energy = 0.5 * crate::linalg::dot(&u, &ku);
    summary["energy"] = json!(energy);

    write_displacement(&network, &u, &dir.join("displacement.csv"))?;
    manifest.artifacts.push("displacement.csv".into());
    let summary_path = dir.join("solve.json");
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;
    manifest.artifacts.push("solve.json".into());
    if a.export_system {
        write_system(&system, &dir, "system")?;
        manifest.artifacts.push("system.coo".into());
        manifest.artifacts.push("system.json".into());
        manifest.format_versions.insert("system".into(), SYSTEM_FORMAT_VERSION);
    }
    manifest.parameters = json!({
        "method": method,
        "problem": problem,
        "m": m,
        "localization": localization,
        "coarse_boundary": config.coarse_boundary(),
        "asymmetry_bound": options.asymmetry_bound,
        "network": input,
    });
    manifest.seeds = Some(StreamSeeds::derive(network.seed));
    manifest.format_versions.insert("network".into(), NETWORK_FORMAT_VERSION);
    manifest.format_versions.insert("displacement".into(), DISPLACEMENT_FORMAT_VERSION);
    manifest.format_versions.insert("solve".into(), SOLVE_FORMAT_VERSION);
    manifest.write(&dir)?;
    let _ = writeln!(out, "energy {energy:.16e}");
    Ok(())
}

fn cmd_study(mut config: Config, path: Option<&Path>, a: &StudyArgs, out: &mut dyn std::io::Write) -> Result<()> {
    apply_network(&a.network, &mut config.network);
    if a.problem.is_some() {
        config.assembly.problem = a.problem;
    }
    if a.coarse_sizes.is_some() {
        config.analysis.coarse_sizes = a.coarse_sizes.clone();
    }
    if a.loc_factor.is_some() {
        config.multiscale.loc_factor = a.loc_factor;
    }
    if a.timing {
        config.analysis.timing = Some(true);
    }
    let (network, coefficients) = config.network_spec()?;
    let dir = config.output();
    let study = StudyConfig {
        coarse_sizes: config.coarse_sizes(&network),
        network,
        coefficients,
        problem: config.problem()?,
        localization: config.localization()?,
        coarse_boundary: config.coarse_boundary(),
        seed: config.seed(),
        timing: config.analysis.timing.unwrap_or(false),
        output: Some(dir.clone()),
    };
    study.validate().map_err(|e| in_section("analysis", e))?;
    prepare_output(&dir)?;
    let result = run_study(&study).map_err(|e| in_section("network", e))?;
    let mut manifest = RunManifest::new("study", path);
    manifest.parameters = serde_json::to_value(&study).map_err(|e| Error::Format(e.to_string()))?;
    manifest.parameters["config_hash"] = json!(study.hash());
    manifest.seeds = Some(result.metadata.seeds);
    manifest.artifacts = vec!["study.csv".into(), "study.json".into()];
    manifest.format_versions.insert("study".into(), STUDY_FORMAT_VERSION);
    manifest.write(&dir)?;
    let _ = writeln!(
        out,
        "rate_l2 {:.4}\nrate_energy {:.4}",
        result.slopes.rate_l2, result.slopes.rate_energy
    );
    Ok(())
}

fn cmd_info(file: &Path, out: &mut dyn std::io::Write) -> Result<()> {
    let mut lines = Vec::new();
    let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("");
    let text = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
    match ext {
        "coo" => {
            let header = text.lines().next().unwrap_or("");
            let dims: Vec<&str> = header.trim_start_matches('%').split_whitespace().collect();
            if dims.len() != 3 {
                return Err(Error::Format(format!("{}: missing COO header", file.display())));
            }
            lines.push(format!("kind coo\nrows {}\ncols {}\nnonzeros {}", dims[0], dims[1], dims[2]));
        }
        "csv" => {
            let mut it = text.lines();
            lines.push(format!("kind csv\nheader {}\nrows {}", it.next().unwrap_or(""), it.count()));
        }
        _ => {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", file.display())))?;
            if v.get("nodes").is_some_and(|n| n.is_array()) {
                let net = read_network(file)?;
                lines.push(network_info(&net, &v));
            } else if v.get("command").is_some() {
                let m: RunManifest =
                    serde_json::from_value(v).map_err(|e| Error::Format(format!("{}: {e}", file.display())))?;
                lines.push(format!("kind manifest\ncommand {}\ncrate_version {}", m.command, m.crate_version));
                for a in &m.artifacts {
                    lines.push(format!("artifact {}", a.display()));
                }
                for (k, ver) in &m.format_versions {
                    lines.push(format!("format {k} {ver}"));
                }
            } else if v.get("slopes").is_some() {
                lines.push(format!(
                    "kind study\nformat_version {}\nnodes {}\nrate_l2 {}\nrate_energy {}\nconfig_hash {}",
                    v["format_version"], v["nodes"], v["slopes"]["rate_l2"], v["slopes"]["rate_energy"], v["config_hash"]
                ));
            } else if v.get("matrix").is_some() {
                lines.push(format!(
                    "kind system\nformat_version {}\ndofs {}\nmatrix {}\nconstrained {}",
                    v["format_version"],
                    v["dofs"],
                    v["matrix"],
                    v["constrained"].as_array().map_or(0, Vec::len)
                ));
            } else if v.get("method").is_some() {
                lines.push(format!("kind solve\n{}", flat_pairs(&v)));
            } else {
                return Err(Error::Format(format!("{}: not a fibernet file", file.display())));
            }
        }
    }
    let _ = writeln!(out, "file {}", file.display());
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
    Ok(())
}

fn network_info(net: &Network, raw: &serde_json::Value) -> String {
    let scheme = raw["scheme"].get("type").and_then(|t| t.as_str()).unwrap_or("none");
    format!(
        "kind network\nformat_version {}\ngenerator {}\nseed {}\ndomain_side {}\nnodes {}\nedges {}\npairs {}\nboundary_nodes {}\ncoefficients {}",
        raw["format_version"],
        raw["generator"],
        net.seed,
        net.domain_side,
        net.nodes.len(),
        net.edges.len(),
        net.pairs.len(),
        net.boundary_nodes().len(),
        scheme
    )
}

fn flat_pairs(v: &serde_json::Value) -> String {
    v.as_object()
        .map(|o| {
            o.iter()
                .filter(|(_, x)| !x.is_object())
                .map(|(k, x)| format!("{k} {x}"))
                .collect::<Vec<_>>()
                .join("\n")
        })
        .unwrap_or_default()
}

/// Writes one line per node: id, position and displacement.
pub fn write_displacement(network: &Network, u: &[f64], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(96 * network.nodes.len());
    s.push_str(DISPLACEMENT_HEADER);
    s.push('\n');
    for n in &network.nodes {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            n.id,
            n.position[0],
            n.position[1],
            u[2 * n.id],
            u[2 * n.id + 1]
        );
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads a displacement file back into an interleaved dof vector.
pub fn read_displacement(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(DISPLACEMENT_HEADER) {
        return Err(Error::Format(format!("{}: unexpected header", path.display())));
    }
    let mut u = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Format(format!("{}: malformed line {}", path.display(), k + 2));
        if f.len() != 5 || f[0].parse::<usize>().ok() != Some(k) {
            return Err(bad());
        }
        for x in &f[3..] {
            u.push(x.parse::<f64>().map_err(|_| bad())?);
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_resolution_order() {
        assert_eq!(resolve_threads(Some(3), Some("2".into()), Some(1)).unwrap(), Some(3));
        assert_eq!(resolve_threads(None, Some(" 2 ".into()), Some(1)).unwrap(), Some(2));
        assert_eq!(resolve_threads(None, None, Some(1)).unwrap(), Some(1));
        assert_eq!(resolve_threads(None, Some(String::new()), None).unwrap(), None);
        assert_eq!(resolve_threads(None, Some("x".into()), None).unwrap_err().exit_code(), 2);
        assert!(resolve_threads(Some(0), None, None).is_err());
    }

    #[test]
    fn preset_names() {
        assert_eq!(parse_preset("unit-random").unwrap(), crate::analysis::Preset::UnitRandom);
        assert!(parse_preset("soft").is_err());
    }
}
