use std::path::Path;
use std::process::{Command, Output};

use fibernet::analysis::{build_network, relative_errors, solve_reference};
use fibernet::assembly::{assemble_stiffness, build_problem, AssemblyOptions, ProblemSpec};
use fibernet::cli::{read_displacement, RunManifest, MANIFEST_FILE};
use fibernet::multiscale::{run_lod, CoarseBoundary, Localization};
use fibernet::network::{read_network, Side};

fn fibernet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fibernet"))
        .args(args)
        .env_remove("FIBERNET_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = fibernet(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_structured_counts_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("net");
    ok(&["generate", "--type", "structured", "--m", "64", "--domain", "1.0", "--out", s(&out)]);
    let net = read_network(&out.join("network.json")).unwrap();
    assert_eq!(net.nodes.len(), 65 * 65);
    let manifest = RunManifest::read(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.command, "generate");
    assert_eq!(manifest.artifacts, vec![Path::new("network.json").to_path_buf()]);
    assert_eq!(manifest.format_versions["network"], 1);
}

#[test]
fn generate_fiber_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["generate", "--type", "fiber", "--target-nodes", "5000", "--seed", "7", "--out", s(d)]);
    }
    let fa = std::fs::read(a.join("network.json")).unwrap();
    let fb = std::fs::read(b.join("network.json")).unwrap();
    assert_eq!(fa, fb);
    let net = read_network(&a.join("network.json")).unwrap();
    assert!((4000..=6000).contains(&net.nodes.len()), "{} nodes", net.nodes.len());
}

#[test]
fn out_of_range_magnitude_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let r = fibernet(&["generate", "--type", "perturbed", "--magnitude", "0.6", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("network.magnitude"));
    assert!(!out.exists());
}

#[test]
fn missing_network_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve");
    let missing = dir.path().join("nope.json");
    let r = fibernet(&["solve", "--network", s(&missing), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn exact_displaced_solve_moves_right_side() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("g");
    ok(&["generate", "--type", "structured", "--m", "12", "--domain", "2.0", "--out", s(&gen)]);
    let net_path = gen.join("network.json");
    let out = dir.path().join("s");
    ok(&[
        "solve", "--network", s(&net_path), "--method", "exact", "--problem", "displace", "--export-system", "--out",
        s(&out),
    ]);
    let net = read_network(&net_path).unwrap();
    let u = read_displacement(&out.join("displacement.csv")).unwrap();
    assert_eq!(u.len(), net.dof_count());
    for i in net.side_nodes(Side::Right) {
        assert!((u[2 * i] - 0.2).abs() <= 1e-14, "node {i}: {}", u[2 * i]);
        assert_eq!(u[2 * i + 1], 0.0);
    }
    for i in net.side_nodes(Side::Left) {
        assert_eq!((u[2 * i], u[2 * i + 1]), (0.0, 0.0));
    }
    let manifest = RunManifest::read(&out.join(MANIFEST_FILE)).unwrap();
    for a in &manifest.artifacts {
        assert!(out.join(a).is_file(), "{}", a.display());
    }
    assert!(manifest.artifacts.iter().any(|a| a.ends_with("system.coo")));
}

#[test]
fn lod_with_global_correctors_matches_library_run() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("g");
    ok(&["generate", "--type", "perturbed", "--m", "16", "--seed", "3", "--out", s(&gen)]);
    let net_path = gen.join("network.json");
    let (exact, lod) = (dir.path().join("exact"), dir.path().join("lod"));
    ok(&["solve", "--network", s(&net_path), "--method", "exact", "--problem", "force", "--out", s(&exact)]);
    ok(&[
        "solve", "--network", s(&net_path), "--method", "lod", "--problem", "force", "--m", "8", "--loc-factor",
        "999", "--dump-basis", "--out", s(&lod),
    ]);
    assert!(lod.join("basis.coo").is_file());
    let u = read_displacement(&exact.join("displacement.csv")).unwrap();
    let u_ms = read_displacement(&lod.join("displacement.csv")).unwrap();

    let net = read_network(&net_path).unwrap();
    let k = assemble_stiffness(&net, &AssemblyOptions::default()).unwrap().matrix;
    let system = build_problem(&net, k, &ProblemSpec::force()).unwrap();
    let k_free = system.free_matrix();
    let cli_err = relative_errors(&u, &u_ms, &system.k).unwrap();

    let reference = solve_reference(&system, &k_free).unwrap();
    let loc = Localization {
        factor: 999.0,
        ..Localization::default()
    };
    let run = run_lod(&net, &system, &k_free, 8, &loc, CoarseBoundary::default()).unwrap();
    let lib_err = relative_errors(&reference.u, &run.solution.u, &system.k).unwrap();
    assert!((cli_err.energy - lib_err.energy).abs() <= 1e-10, "{cli_err:?} vs {lib_err:?}");
}

#[test]
fn study_runs_both_problems_and_prints_slopes() {
    let dir = tempfile::tempdir().unwrap();
    for problem in ["force", "displace"] {
        let out = dir.path().join(problem);
        let stdout = ok(&[
            "study", "--type", "perturbed", "--m", "16", "--coarse-sizes", "2,4,8", "--problem", problem, "--out",
            s(&out),
        ]);
        let lines: Vec<&str> = stdout.lines().collect();
        assert_eq!(lines.len(), 2, "{stdout}");
        assert!(lines[0].starts_with("rate_l2 "));
        assert!(lines[1].starts_with("rate_energy "));
        let csv = std::fs::read_to_string(out.join("study.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("m,H,ell,rel_l2,rel_energy,wall_seconds"));
        assert_eq!(csv.lines().count(), 4);
        let manifest = RunManifest::read(&out.join(MANIFEST_FILE)).unwrap();
        assert_eq!(manifest.command, "study");
        assert_eq!(manifest.artifacts.len(), 2);
    }
}

#[test]
fn failed_run_removes_stale_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("study");
    ok(&["study", "--type", "structured", "--m", "8", "--coarse-sizes", "2,4,8", "--out", s(&out)]);
    assert!(out.join(MANIFEST_FILE).is_file());
    // two coarse sizes cannot give a rate: the rerun fails after starting
    let r = fibernet(&["study", "--type", "structured", "--m", "8", "--coarse-sizes", "2,4", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(!out.join(MANIFEST_FILE).exists());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        ok(&[
            "study", "--type", "perturbed", "--m", "16", "--coarse-sizes", "2,4,8", "--seed", "11", "--threads",
            threads, "--out", s(&out),
        ]);
        csvs.push(std::fs::read(out.join("study.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);

    let out = dir.path().join("env");
    let r = Command::new(env!("CARGO_BIN_EXE_fibernet"))
        .args(["study", "--type", "perturbed", "--m", "16", "--coarse-sizes", "2,4,8", "--seed", "11", "--out", s(&out)])
        .env("FIBERNET_THREADS", "2")
        .output()
        .unwrap();
    assert!(r.status.success());
    assert_eq!(std::fs::read(out.join("study.csv")).unwrap(), csvs[0]);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        r#"
[network]
type = "structured"
m_fine = 10
domain_side = 0.01
preset = "stiff"

[cli]
seed = 4
"#,
    )
    .unwrap();
    let out = dir.path().join("g");
    ok(&["--config", s(&cfg), "generate", "--m", "6", "--out", s(&out)]);
    let net = read_network(&out.join("network.json")).unwrap();
    assert_eq!(net.nodes.len(), 49);
    assert_eq!(net.domain_side, 0.01);
    assert_eq!(net.seed, 4);
    assert_eq!(net.edges[0].k, 3e10);
    let manifest = RunManifest::read(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.config.as_deref(), Some(cfg.as_path()));

    std::fs::write(&cfg, "[network]\nm_fine = \"many\"\n").unwrap();
    let r = fibernet(&["--config", s(&cfg), "generate", "--out", s(&dir.path().join("bad"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));
}

#[test]
fn seed_flag_matches_library_generation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    ok(&["generate", "--type", "perturbed", "--m", "8", "--seed", "21", "--out", s(&out)]);
    let from_cli = read_network(&out.join("network.json")).unwrap();
    let mut cfg = fibernet::cli::Config::default();
    cfg.network.kind = Some(fibernet::cli::NetworkType::Perturbed);
    cfg.network.m_fine = Some(8);
    let (spec, scheme) = cfg.network_spec().unwrap();
    let direct = build_network(&spec, &scheme, 21).unwrap();
    assert_eq!(from_cli, direct);
}

#[test]
fn info_describes_each_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("g");
    ok(&["generate", "--type", "structured", "--m", "4", "--out", s(&gen)]);
    let info = ok(&["info", s(&gen.join("network.json"))]);
    assert!(info.contains("kind network"));
    assert!(info.contains("nodes 25"));
    let info = ok(&["info", s(&gen.join(MANIFEST_FILE))]);
    assert!(info.contains("command generate"));

    let out = dir.path().join("s");
    ok(&["solve", "--network", s(&gen.join("network.json")), "--m", "2", "--export-system", "--out", s(&out)]);
    assert!(ok(&["info", s(&out.join("system.coo"))]).contains("rows 50"));
    assert!(ok(&["info", s(&out.join("system.json"))]).contains("kind system"));
    assert!(ok(&["info", s(&out.join("displacement.csv"))]).contains("rows 25"));
    assert!(ok(&["info", s(&out.join("solve.json"))]).contains("kind solve"));

    let r = fibernet(&["info", s(&dir.path().join("missing.json"))]);
    assert_eq!(r.status.code(), Some(2));
}
