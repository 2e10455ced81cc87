use rotorlab_cli::config::{parse_values, Params, RunConfig};
use rotorlab_cli::manifest::{sha256_hex, RunManifest, MANIFEST_NAME};
use rotorlab_cli::{experiments, plot, run_experiment, sweep, CliError};
use rotorlab_core::coupled::CoupledSpec;
use rotorlab_core::pseudoclassical::CorrespondenceParams;
use rotorlab_core::quantum::{QheParams, QuasiperiodicParams};
use rotorlab_core::topology::PumpParams;
use serde::Serialize;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rotorlab"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn small_diffusion(out: &Path) -> RunConfig {
    let mut c = RunConfig::new("classical-diffusion");
    c.seed = 11;
    c.out = Some(out.to_path_buf());
    for s in ["n_traj=500", "steps=120", "window_lo=20", "lyapunov_steps=5000", "lyapunov_transient=100"] {
        c.apply_set(s).unwrap();
    }
    c
}

#[test]
fn config_round_trips_through_toml() {
    let mut c = RunConfig::new("nh-spectrum");
    c.seed = 5;
    c.out = Some("runs/x".into());
    c.apply_set("k=2.5").unwrap();
    c.apply_set("gammas=[0.1, 0.2]").unwrap();
    c.apply_set("l=64").unwrap();
    let back = RunConfig::from_toml(&c.to_toml()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn unknown_top_level_key_is_a_config_error() {
    let err = RunConfig::from_toml("experiment = \"resonance\"\nbogus = 1\n").unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unknown_parameter_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"resonance\"\n[params]\nkk = 3.0\n");
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown parameter `kk`"));
    assert!(!dir.path().join("o").exists(), "validation must precede computation");
}

#[test]
fn unknown_experiment_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"no-such-thing\"\n");
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn wrong_type_and_negative_ints_are_rejected() {
    let mut c = RunConfig::new("resonance");
    c.apply_set("steps=\"many\"").unwrap();
    assert!(matches!(run_experiment(&c), Err(CliError::Config(_))));
    let mut c = RunConfig::new("resonance");
    c.apply_set("steps=-3").unwrap();
    assert!(matches!(run_experiment(&c), Err(CliError::Config(_))));
}

#[test]
fn numerical_failure_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"qhe-energy-growth\"\n[params]\ntheta2_samples = 2\nsteps = 5\nl = 64\n");
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn cli_run_with_overrides_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"resonance\"\nseed = 3\n[params]\nsteps = 10\n");
    let o = dir.path().join("o");
    let out = bin()
        .args(["run"])
        .arg(&cfg)
        .args(["--set", "k=2.0", "--seed", "9", "--out"])
        .arg(&o)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = RunManifest::load(&o.join(MANIFEST_NAME)).unwrap();
    assert_eq!(m.config.seed, 9);
    assert_eq!(m.config.params["k"].as_float(), Some(2.0));
    assert_eq!(m.config.params["steps"].as_integer(), Some(10));
    // Resolved defaults are recorded too.
    assert!(m.config.params.contains_key("l"));
    let err = m.diagnostics["max_rel_error_vs_k2t2_over_4"].as_f64().unwrap();
    assert!(err < 1e-10);
}

#[test]
fn manifest_hashes_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&small_diffusion(dir.path())).unwrap();
    assert!(!m.files.is_empty());
    for f in &m.files {
        let bytes = std::fs::read(dir.path().join(&f.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), f.sha256);
        assert_eq!(bytes.len() as u64, f.bytes);
    }
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = run_experiment(&small_diffusion(a.path())).unwrap();
    let mb = run_experiment(&small_diffusion(b.path())).unwrap();
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.diagnostics, mb.diagnostics);

    let mut other = small_diffusion(b.path());
    other.seed = 12;
    let mc = run_experiment(&other).unwrap();
    assert_ne!(ma.files, mc.files);
}

#[test]
fn sweep_writes_one_manifest_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = RunConfig::new("resonance");
    base.apply_set("steps=8").unwrap();
    base.apply_set("l=256").unwrap();
    let s = sweep::run_sweep(&base, "k", "0.5,1,1.5,2,2.5,3", dir.path()).unwrap();
    assert_eq!(s.children.len(), 6);
    for c in &s.children {
        assert!(c.ok);
        let m = RunManifest::load(&c.dir.join(MANIFEST_NAME)).unwrap();
        assert_eq!(m.config.params["k"].as_float(), c.value.as_float().or(c.value.as_integer().map(|i| i as f64)));
    }
    assert!(dir.path().join("sweep.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn sweep_rejects_empty_values_and_unknown_axes() {
    let dir = tempfile::tempdir().unwrap();
    let base = RunConfig::new("resonance");
    let e = sweep::run_sweep(&base, "k", " , ", dir.path()).unwrap_err();
    assert!(matches!(e, CliError::Usage(_)));
    let e = sweep::run_sweep(&base, "nope", "1,2", dir.path()).unwrap_err();
    assert!(matches!(e, CliError::Usage(_)));
    assert!(!dir.path().join("sweep.json").exists());
}

#[test]
fn sweep_partial_failure_exits_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"qhe-energy-growth\"\n[params]\nsteps = 4\nl = 32\n");
    let out = bin()
        .arg("sweep")
        .arg(&cfg)
        .args(["--axis", "theta2_samples", "--values", "2,8", "--out"])
        .arg(dir.path().join("s"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("s/theta2_samples_001").join(MANIFEST_NAME).exists());
}

#[test]
fn list_values_split_on_top_level_commas() {
    let v = parse_values("[1.5,2],[3], 4");
    assert_eq!(v.len(), 3);
    assert_eq!(v[0].as_array().unwrap().len(), 2);
}

#[test]
fn plotdata_emits_two_column_series() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small_diffusion(dir.path())).unwrap();
    let out = plot::emit_plotdata(&dir.path().join(MANIFEST_NAME), "diffusion", None).unwrap();
    let csv = std::fs::read_to_string(out.join("moments.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,varJ");
    assert_eq!(csv.lines().count(), 122);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("plot.json")).unwrap()).unwrap();
    assert_eq!(meta["x"]["scale"], "linear");
    assert_eq!(meta["series"][0], "moments.csv");
}

#[test]
fn plotdata_reports_missing_series() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small_diffusion(dir.path())).unwrap();
    let mpath = dir.path().join(MANIFEST_NAME);
    let mut m = RunManifest::load(&mpath).unwrap();
    m.files.clear();
    std::fs::write(&mpath, serde_json::to_string(&m).unwrap()).unwrap();
    let e = plot::emit_plotdata(&mpath, "diffusion", None).unwrap_err();
    assert!(matches!(e, CliError::Data(ref s) if s.contains("moments")), "{e}");
    assert_eq!(e.exit_code(), 2);

    let e = plot::emit_plotdata(&mpath, "nonexistent", None).unwrap_err();
    assert!(matches!(e, CliError::Usage(_)));
}

#[test]
fn registry_covers_the_required_experiments() {
    let ids: Vec<&str> = experiments::registry().iter().map(|e| e.id).collect();
    for want in [
        "classical-diffusion",
        "qkr-localization",
        "resonance",
        "antiresonance",
        "anderson-bridge",
        "pseudoclassical-dkr",
        "gauss-sums",
        "chern-scan",
        "thouless-pump",
        "coupled-entanglement",
        "nh-spectrum",
        "nh-ratchet",
        "kepler-threshold",
        "quasiperiodic-transition",
        "qhe-energy-growth",
        "sawtooth-localization",
    ] {
        assert!(ids.contains(&want), "{want}");
    }
    for e in experiments::registry() {
        let schema = (e.schema)();
        let keys: std::collections::BTreeSet<_> = schema.iter().map(|p| p.key).collect();
        assert_eq!(keys.len(), schema.len(), "duplicate key in {}", e.id);
        assert!(Params::resolve(&schema, &Default::default(), 0).is_ok(), "{} defaults", e.id);
    }
}

/// Every field of a core parameter struct must be reachable from the
/// experiment schema, under `prefix`, with the schema default.
fn assert_schema_covers<T: Serialize>(id: &str, prefix: &str, value: &T, skip: &[&str]) {
    let exp = experiments::find(id).unwrap();
    let params = Params::resolve(&(exp.schema)(), &Default::default(), 0).unwrap();
    let json = serde_json::to_value(value).unwrap();
    for (field, v) in json.as_object().unwrap() {
        if skip.contains(&field.as_str()) {
            continue;
        }
        let key = format!("{prefix}{field}");
        let got = params.values.get(&key).unwrap_or_else(|| panic!("{id}: field `{field}` has no schema key `{key}`"));
        let got = serde_json::to_value(got).unwrap();
        assert_eq!(got.as_f64(), v.as_f64(), "{id}: `{key}`");
    }
}

#[test]
fn schemas_reflect_core_parameter_structs() {
    let resolved = |id: &str| {
        let exp = experiments::find(id).unwrap();
        Params::resolve(&(exp.schema)(), &Default::default(), 0).unwrap()
    };
    let q: QheParams = resolved("qhe-energy-growth").extract().unwrap();
    assert_schema_covers("qhe-energy-growth", "", &q, &[]);
    let q: QuasiperiodicParams = resolved("quasiperiodic-transition").extract().unwrap();
    assert_schema_covers("quasiperiodic-transition", "", &q, &[]);
    let q: PumpParams = resolved("thouless-pump").extract().unwrap();
    assert_schema_covers("thouless-pump", "", &q, &[]);
    let q: CoupledSpec = resolved("coupled-entanglement").extract().unwrap();
    assert_schema_covers("coupled-entanglement", "", &q, &[]);
    let p = resolved("pseudoclassical-dkr");
    let c = CorrespondenceParams {
        k: p.f64("q_k"),
        delta: p.f64("q_delta"),
        l: p.i64("q_l"),
        beta_samples: p.usize("q_beta_samples"),
        theta_samples: p.usize("q_theta_samples"),
        steps: p.usize("q_steps"),
        lattice: p.usize("q_lattice"),
        seed: 0,
    };
    assert_schema_covers("pseudoclassical-dkr", "q_", &c, &["seed"]);
}
