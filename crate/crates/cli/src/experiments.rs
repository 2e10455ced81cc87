//! Experiment registry. Each entry declares its parameter schema, the
//! figures it can feed, and a runner writing into a [`RunOutput`].

use crate::config::{boolean, float, floats, int, ParamSpec, Params};
use crate::error::{CliError, CliResult};
use crate::manifest::RunOutput;
use rotorlab_core::anderson::{self, TbMethod, TightBindingChain};
use rotorlab_core::classical::{self, Ensemble, KickPotential, PhasePoint};
use rotorlab_core::coupled::{self, CoupledSpec, TwoRotorState};
use rotorlab_core::diagnostics;
use rotorlab_core::kepler;
use rotorlab_core::nonhermitian;
use rotorlab_core::pseudoclassical::{self, CorrespondenceParams};
use rotorlab_core::quantum::{self, FloquetSpec, InitKind, QheParams, QuasiperiodicParams};
use rotorlab_core::topology::{self, PumpParams, ResonantDkrSpec};
use rotorlab_core::{Error, TimeSeries};
use std::f64::consts::{FRAC_PI_3, PI, TAU};

#[derive(Debug, Clone, Copy)]
pub struct Axis {
    pub column: &'static str,
    pub label: &'static str,
    pub log: bool,
}

/// A plot over every output file whose name starts with `files`.
#[derive(Debug, Clone, Copy)]
pub struct Figure {
    pub id: &'static str,
    pub title: &'static str,
    pub files: &'static str,
    pub x: Axis,
    pub y: Axis,
}

pub struct Experiment {
    pub id: &'static str,
    pub summary: &'static str,
    pub schema: fn() -> Vec<ParamSpec>,
    pub run: fn(&Params, &mut RunOutput) -> CliResult<()>,
    pub figures: &'static [Figure],
}

pub fn registry() -> Vec<Experiment> {
    vec![
        Experiment {
            id: "classical-diffusion",
            summary: "standard map ensemble diffusion and Lyapunov exponent",
            schema: || {
                vec![
                    float("k", 10.0, "kick strength K"),
                    int("n_traj", 10_000, "ensemble size"),
                    int("steps", 1000, "kicks"),
                    float("window_lo", 100.0, "fit window start"),
                    int("lyapunov_steps", 100_000, "Benettin steps"),
                    int("lyapunov_transient", 1000, "discarded steps"),
                ]
            },
            run: classical_diffusion,
            figures: &[Figure {
                id: "diffusion",
                title: "momentum variance",
                files: "moments",
                x: Axis { column: "t", label: "t", log: false },
                y: Axis { column: "varJ", label: "<(J - <J>)^2>", log: false },
            }],
        },
        Experiment {
            id: "qkr-localization",
            summary: "dynamical localization of the quantum kicked rotor",
            schema: || {
                vec![
                    float("k", 20.0, "quantum kick strength"),
                    float("period", 0.25, "kick period T"),
                    int("l", 8192, "lattice half-width"),
                    int("steps", 3000, "kicks"),
                    int("record_every", 10, "series stride"),
                    float("init_width", 2.0, "Gaussian width in momentum; 0 selects |0>"),
                ]
            },
            run: qkr_localization,
            figures: &[
                Figure {
                    id: "localization",
                    title: "final momentum distribution",
                    files: "distribution",
                    x: Axis { column: "m", label: "m", log: false },
                    y: Axis { column: "prob", label: "P(m)", log: true },
                },
                Figure {
                    id: "energy",
                    title: "kinetic energy",
                    files: "series",
                    x: Axis { column: "t", label: "t", log: false },
                    y: Axis { column: "energy", label: "<m^2>/2", log: false },
                },
            ],
        },
        Experiment {
            id: "resonance",
            summary: "ballistic growth at a quantum resonance",
            schema: || {
                vec![
                    float("k", 3.0, "quantum kick strength"),
                    float("period", 4.0 * PI, "kick period"),
                    int("l", 1024, "lattice half-width"),
                    int("steps", 50, "kicks"),
                ]
            },
            run: resonance,
            figures: &[Figure {
                id: "energy",
                title: "kinetic energy",
                files: "series",
                x: Axis { column: "t", label: "t", log: true },
                y: Axis { column: "energy", label: "<m^2>/2", log: true },
            }],
        },
        Experiment {
            id: "antiresonance",
            summary: "period-two recurrence",
            schema: || {
                vec![
                    float("k", 5.0, "quantum kick strength"),
                    float("period", TAU, "kick period"),
                    int("l", 256, "lattice half-width"),
                    int("steps", 2, "kicks"),
                    float("init_width", 20.0, "Gaussian width in J = mT; 0 selects |0>"),
                ]
            },
            run: antiresonance,
            figures: &[Figure {
                id: "energy",
                title: "kinetic energy",
                files: "series",
                x: Axis { column: "t", label: "t", log: false },
                y: Axis { column: "energy", label: "<m^2>/2", log: false },
            }],
        },
        Experiment {
            id: "anderson-bridge",
            summary: "tight-binding chain of the Floquet eigenproblem",
            schema: || {
                vec![
                    float("k", 3.0, "quantum kick strength"),
                    float("period", 2.0, "kick period"),
                    float("eps", 0.4, "quasienergy"),
                    int("sites", 801, "chain length"),
                    int("l_max", 0, "hopping range; 0 picks from the potential"),
                    float("period_check", 4.0 * PI / 3.0, "rational period for the periodicity test"),
                    int("dyn_l", 512, "lattice half-width of the dynamical run"),
                    int("dyn_steps", 2000, "kicks of the dynamical run"),
                ]
            },
            run: anderson_bridge,
            figures: &[Figure {
                id: "sites",
                title: "site energies",
                files: "sites",
                x: Axis { column: "n", label: "n", log: false },
                y: Axis { column: "W", label: "W_n", log: false },
            }],
        },
        Experiment {
            id: "pseudoclassical-dkr",
            summary: "exponential spreading near the hyperbolic fixed point",
            schema: || {
                vec![
                    float("k", 0.005, "rescaled kick K"),
                    floats("deltas", &[0.1, 0.01, 0.001], "initial momentum widths"),
                    int("n_traj", 10_000, "ensemble size"),
                    int("steps", 2500, "kicks"),
                    boolean("correspondence", false, "also run the quantum comparison below"),
                    float("q_k", 20.0, "quantum kick strength for the comparison"),
                    float("q_delta", 0.05, "detuning from T = 2 pi l"),
                    int("q_l", 1, "resonance order l"),
                    int("q_beta_samples", 64, "quasi-momentum samples"),
                    int("q_theta_samples", 20_000, "classical ensemble size"),
                    int("q_steps", 50, "kicks"),
                    int("q_lattice", 4096, "lattice half-width"),
                ]
            },
            run: pseudoclassical_dkr,
            figures: &[
                Figure {
                    id: "dk-exponential",
                    title: "exponential spreading",
                    files: "spreading_",
                    x: Axis { column: "t", label: "t", log: false },
                    y: Axis { column: "lnJ2", label: "ln <J^2>", log: false },
                },
                Figure {
                    id: "correspondence",
                    title: "quantum vs pseudoclassical",
                    files: "correspondence",
                    x: Axis { column: "t", label: "t", log: false },
                    y: Axis { column: "J2_quantum", label: "<J^2>", log: false },
                },
            ],
        },
        Experiment {
            id: "gauss-sums",
            summary: "Gaussian sum coefficients of the resonant free evolution",
            schema: || vec![int("r", 1, "numerator"), int("s_max", 8, "largest denominator")],
            run: gauss_sums,
            figures: &[Figure {
                id: "gauss",
                title: "|G_l|",
                files: "gauss",
                x: Axis { column: "l", label: "l", log: false },
                y: Axis { column: "abs", label: "|G_l|", log: false },
            }],
        },
        Experiment {
            id: "chern-scan",
            summary: "quasienergy bands and Chern numbers of the on-resonance double-kicked rotor",
            schema: || {
                vec![
                    int("r", 1, "T0 = 2 pi r / s"),
                    int("s", 3, "T0 = 2 pi r / s"),
                    float("k", 2.0, "kick strength"),
                    int("n_phi", 48, "Bloch-phase mesh"),
                    int("n_alpha", 48, "synthetic-phase mesh"),
                ]
            },
            run: chern_scan,
            figures: &[Figure {
                id: "curvature",
                title: "Berry curvature",
                files: "curvature",
                x: Axis { column: "phi", label: "phi", log: false },
                y: Axis { column: "B", label: "B", log: false },
            }],
        },
        Experiment {
            id: "thouless-pump",
            summary: "adiabatic pumping over one synthetic-phase cycle",
            schema: || {
                vec![
                    int("r", 1, "T0 = 2 pi r / s"),
                    int("s", 3, "T0 = 2 pi r / s"),
                    float("k", 2.0, "kick strength"),
                    int("band", 1, "pumped band, quasienergy order"),
                    int("d_f", 1000, "periods per cycle"),
                    int("l", 0, "lattice half-width; 0 uses d_f + 128"),
                    int("n_phi", 24, "Bloch-phase mesh"),
                    int("n_alpha", 24, "synthetic-phase mesh"),
                    int("leakage_samples", 10, "band-leakage checks per cycle"),
                ]
            },
            run: thouless_pump,
            figures: &[Figure {
                id: "pump",
                title: "mean momentum over one cycle",
                files: "pump",
                x: Axis { column: "t", label: "t", log: false },
                y: Axis { column: "meanI", label: "<I>", log: false },
            }],
        },
        Experiment {
            id: "coupled-entanglement",
            summary: "energies and entanglement of two coupled rotors",
            schema: || {
                vec![
                    float("k1", 9.0, "first kick strength"),
                    float("k2", 10.0, "second kick strength"),
                    float("xi", 0.1, "coupling"),
                    int("l", 384, "lattice half-width per rotor"),
                    int("steps", 4000, "kicks"),
                    int("dense", 40, "record every step up to here"),
                    int("n_log", 40, "log-spaced records after that"),
                    float("late_lo", 1000.0, "late fit window start"),
                ]
            },
            run: coupled_entanglement,
            figures: &[
                Figure {
                    id: "coupled-energy",
                    title: "rotor energies",
                    files: "coupled",
                    x: Axis { column: "t", label: "t", log: true },
                    y: Axis { column: "E1", label: "E_1", log: true },
                },
                Figure {
                    id: "coupled-entropy",
                    title: "von Neumann entropy",
                    files: "coupled",
                    x: Axis { column: "t", label: "t", log: true },
                    y: Axis { column: "SvN", label: "S_vN", log: false },
                },
            ],
        },
        Experiment {
            id: "nh-spectrum",
            summary: "quasienergy spectra of the PT-symmetric kicked rotor",
            schema: || {
                vec![
                    float("k", 3.0, "kick strength"),
                    floats("periods", &[1.4, FRAC_PI_3], "kick periods"),
                    floats("gammas", &[0.01, 0.02, 0.05, 0.1, 0.2, 0.3], "gain/loss amplitudes"),
                    int("l", 192, "lattice half-width"),
                    floats("threshold_grid", &[0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2, 0.25, 0.3], "gamma grid for the threshold of the first period"),
                ]
            },
            run: nh_spectrum,
            figures: &[Figure {
                id: "nh-spectrum",
                title: "average imaginary quasienergy",
                files: "summary_",
                x: Axis { column: "gamma", label: "gamma", log: false },
                y: Axis { column: "mean_abs_log", label: "<|ln|lambda||>", log: true },
            }],
        },
        Experiment {
            id: "nh-ratchet",
            summary: "directed transport from gain-selected modes",
            schema: || {
                vec![
                    float("k", 3.0, "kick strength"),
                    float("period", FRAC_PI_3, "kick period"),
                    float("gamma", 1.0 / 30.0, "gain/loss amplitude"),
                    int("steps", 400, "kicks"),
                    int("l", 4096, "lattice half-width"),
                ]
            },
            run: nh_ratchet,
            figures: &[Figure {
                id: "nh-ratchet",
                title: "mean momentum",
                files: "ratchet",
                x: Axis { column: "t", label: "t", log: false },
                y: Axis { column: "meanI", label: "<I>", log: false },
            }],
        },
        Experiment {
            id: "kepler-threshold",
            summary: "microwave ionization thresholds from the Kepler map",
            schema: || {
                vec![
                    floats("omega0s", &[1.5, 2.0, 3.0], "scaled frequencies"),
                    float("n0", 1.0, "initial principal action"),
                    int("n_traj", 4000, "trajectories per field"),
                    int("steps", 1000, "kicks"),
                    int("grid_points", 49, "fields per frequency"),
                    float("span", 4.0, "scan from eps0c / span to eps0c * span"),
                ]
            },
            run: kepler_threshold,
            figures: &[Figure {
                id: "kepler-threshold",
                title: "10% ionization threshold",
                files: "thresholds",
                x: Axis { column: "omega0", label: "omega_0", log: false },
                y: Axis { column: "eps_threshold", label: "eps_0", log: true },
            }],
        },
        Experiment {
            id: "quasiperiodic-transition",
            summary: "kicked rotor with two incommensurate modulation frequencies",
            schema: || {
                vec![
                    float("k_classical", 6.0, "K = k hbar_eff"),
                    float("eps", 0.8, "modulation depth"),
                    float("omega2", TAU * 5f64.sqrt(), "first modulation frequency"),
                    float("omega3", TAU * 13f64.sqrt(), "second modulation frequency"),
                    float("hbar_eff", 2.89, "effective Planck constant, equal to T"),
                    int("steps", 1000, "kicks"),
                    int("l", 4096, "lattice half-width"),
                ]
            },
            run: quasiperiodic_transition,
            figures: &[Figure {
                id: "energy",
                title: "kinetic energy",
                files: "series",
                x: Axis { column: "t", label: "t", log: true },
                y: Axis { column: "energy", label: "<m^2>/2", log: true },
            }],
        },
        Experiment {
            id: "qhe-energy-growth",
            summary: "spin-1/2 rotor with a Chern-insulator kick texture",
            schema: || {
                vec![
                    int("l", 1024, "lattice half-width"),
                    float("hbar_eff", 1.0, "effective Planck constant"),
                    float("omega_tilde", 2.0, "incommensurate drive frequency"),
                    float("mass", 0.8, "texture mass"),
                    float("amplitude", 1.0, "texture scale"),
                    int("theta2_samples", 16, "initial theta2 samples"),
                    int("steps", 400, "kicks"),
                ]
            },
            run: qhe_energy_growth,
            figures: &[Figure {
                id: "energy",
                title: "averaged kinetic energy",
                files: "qhe",
                x: Axis { column: "t", label: "t", log: false },
                y: Axis { column: "energy", label: "E", log: false },
            }],
        },
        Experiment {
            id: "sawtooth-localization",
            summary: "localization in the quantum sawtooth map",
            schema: || {
                vec![
                    float("k", 1.5, "quantum kick strength"),
                    float("period", 1.0, "kick period"),
                    int("l", 2048, "lattice half-width"),
                    int("steps", 2000, "kicks"),
                    int("record_every", 10, "series stride"),
                ]
            },
            run: sawtooth_localization,
            figures: &[
                Figure {
                    id: "localization",
                    title: "final momentum distribution",
                    files: "distribution",
                    x: Axis { column: "m", label: "m", log: false },
                    y: Axis { column: "prob", label: "P(m)", log: true },
                },
                Figure {
                    id: "energy",
                    title: "kinetic energy",
                    files: "series",
                    x: Axis { column: "t", label: "t", log: false },
                    y: Axis { column: "energy", label: "<m^2>/2", log: false },
                },
            ],
        },
    ]
}

pub fn find(id: &str) -> CliResult<Experiment> {
    registry()
        .into_iter()
        .find(|e| e.id == id)
        .ok_or_else(|| CliError::Config(format!("unknown experiment `{id}`")))
}

fn positive(p: &Params, keys: &[&str]) -> CliResult<()> {
    for k in keys {
        let v = p.values.get(*k).and_then(|v| v.as_float().or(v.as_integer().map(|i| i as f64)));
        if v.is_some_and(|x| !(x > 0.0)) {
            return Err(CliError::Config(format!("parameter `{k}` must be positive")));
        }
    }
    Ok(())
}

fn init_kind(width: f64) -> InitKind {
    if width > 0.0 {
        InitKind::Gaussian {
            center: 0.0,
            width,
            theta0: 0.0,
        }
    } else {
        InitKind::Delta { m0: 0 }
    }
}

fn spill_warning(out: &mut RunOutput, first: Option<usize>, edge: f64) {
    if let Some(t) = first {
        out.warn(format!("spill: edge occupation {edge:.2e}, first above threshold at step {t}"));
    }
}

fn localization_run(spec: &FloquetSpec, l: usize, steps: usize, every: usize, init: &InitKind, out: &mut RunOutput) -> CliResult<()> {
    let s = quantum::init_state(l, spec.period, init)?;
    let r = quantum::evolve(&s, spec, steps, every)?;
    spill_warning(out, r.first_spill, r.max_edge);
    out.series("series", &r.series)?;
    let dist = quantum::distribution_table(&r.state)?;
    out.series("distribution", &dist)?;
    let t = r.series.column("t").unwrap();
    let e = r.series.column("energy").unwrap();
    out.diag("saturation_time", diagnostics::saturation_time(&t, &e));
    out.diag("final_energy", e.last());
    let m = dist.column("m").unwrap();
    let p = dist.column("prob").unwrap();
    match diagnostics::fit_localization_length(&m, &p, 0.0) {
        Ok(f) => out.diag("localization", f),
        Err(err) => out.warn(format!("localization fit: {err}")),
    }
    Ok(())
}

fn classical_diffusion(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["n_traj", "steps"])?;
    let k = p.f64("k");
    let pot = KickPotential::cosine(k);
    let ens = Ensemble::uniform_theta(p.usize("n_traj"), 0.0, p.seed);
    let run = classical::evolve_ensemble(&ens, &pot, p.usize("steps"), None, &[])?;
    out.series("moments", &run.series)?;
    let fit = classical::diffusion_coefficient(&run.series, (p.f64("window_lo"), p.usize("steps") as f64))?;
    let estimate = classical::diffusion_estimate(k);
    out.diag("diffusion", fit);
    out.diag("diffusion_estimate", estimate);
    out.diag("diffusion_ratio", fit.d / estimate);
    let ly = classical::max_lyapunov(&pot, PhasePoint::new(1.0, 0.5), p.usize("lyapunov_steps"), p.usize("lyapunov_transient"))?;
    out.diag("lyapunov", ly);
    out.diag("lyapunov_estimate", (0.5 * k).ln());
    Ok(())
}

fn qkr_localization(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["l", "steps", "period"])?;
    let (k, t) = (p.f64("k"), p.f64("period"));
    let spec = FloquetSpec::kicked_rotor(k, t);
    localization_run(&spec, p.usize("l"), p.usize("steps"), p.usize("record_every"), &init_kind(p.f64("init_width")), out)?;
    out.diag("ell_estimate", 0.5 * k * k);
    out.diag("timescales", diagnostics::timescales(k * t, k, t).ok());
    Ok(())
}

fn resonance(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["l", "steps"])?;
    let k = p.f64("k");
    let spec = FloquetSpec::kicked_rotor(k, p.f64("period"));
    let s = quantum::init_state(p.usize("l"), spec.period, &InitKind::Delta { m0: 0 })?;
    let r = quantum::evolve(&s, &spec, p.usize("steps"), 1)?;
    spill_warning(out, r.first_spill, r.max_edge);
    out.series("series", &r.series)?;
    let t = r.series.column("t").unwrap();
    let e = r.series.column("energy").unwrap();
    let rel = t
        .iter()
        .zip(&e)
        .skip(1)
        .map(|(t, e)| (e / (0.25 * k * k * t * t) - 1.0).abs())
        .fold(0.0, f64::max);
    out.diag("max_rel_error_vs_k2t2_over_4", rel);
    if let Ok(g) = diagnostics::fit_growth_law(&t, &e, (1.0, *t.last().unwrap())) {
        out.diag("growth", g);
    }
    Ok(())
}

fn antiresonance(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["l", "steps"])?;
    let spec = FloquetSpec::kicked_rotor(p.f64("k"), p.f64("period"));
    let s0 = quantum::init_state(p.usize("l"), spec.period, &init_kind(p.f64("init_width")))?;
    let r = quantum::evolve(&s0, &spec, p.usize("steps"), 1)?;
    out.series("series", &r.series)?;
    let err = r
        .state
        .amps
        .iter()
        .zip(&s0.amps)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    out.diag("recurrence_error", err);
    Ok(())
}

fn anderson_bridge(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["sites", "dyn_l", "dyn_steps"])?;
    let (k, t, eps) = (p.f64("k"), p.f64("period"), p.f64("eps"));
    let pot = KickPotential::cosine(k);
    let check = anderson::site_energies(p.f64("period_check"), eps, 0..=59)?;
    out.diag("detected_period", anderson::detect_period(&check, 12, 1e-9));
    let l_max = match p.usize("l_max") {
        0 => anderson::default_l_max(&pot),
        n => n,
    };
    let chain = TightBindingChain::build(&pot, t, eps, p.usize("sites"), l_max)?;
    let mut sites = TimeSeries::new(&["n", "W"]);
    for (i, w) in chain.w.iter().enumerate() {
        sites.push(vec![(chain.n_start + i as i64) as f64, *w]);
    }
    out.series("sites", &sites)?;
    let finite: Vec<f64> = chain.w.iter().map(|w| w.atan()).collect();
    out.diag("lag1_autocorrelation_atan_w", rotorlab_core::stats::lag1_autocorrelation(&finite));
    let tb = anderson::tb_localization_length(&chain, chain.energy, TbMethod::EigvecDecay)?;
    out.diag("tight_binding", tb);
    let dl = p.usize("dyn_l");
    let s = quantum::init_state(dl, t, &InitKind::Delta { m0: 0 })?;
    let r = quantum::evolve(&s, &FloquetSpec::kicked_rotor(k, t), p.usize("dyn_steps"), p.usize("dyn_steps"))?;
    spill_warning(out, r.first_spill, r.max_edge);
    let dist = quantum::distribution_table(&r.state)?;
    let fit = diagnostics::fit_localization_length(&dist.column("m").unwrap(), &dist.column("prob").unwrap(), 0.0)?;
    let ell_dyn = fit.ell * anderson::DYNAMICAL_PER_EIGENVECTOR_LENGTH;
    out.diag("dynamical", fit);
    out.diag("ell_ratio_dynamical_over_tb", ell_dyn / tb.ell);
    Ok(())
}

fn pseudoclassical_dkr(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["n_traj", "steps"])?;
    let k = p.f64("k");
    let fp = pseudoclassical::fixed_point_analysis(k);
    out.diag("fixed_point", fp);
    let mut fits = Vec::new();
    for (i, &d) in p.f64_list("deltas").iter().enumerate() {
        let s = pseudoclassical::dkr_spreading(k, d, p.usize("n_traj"), p.usize("steps"), p.seed.wrapping_add(i as u64))?;
        out.series(&format!("spreading_{i}"), &s)?;
        let f = pseudoclassical::fit_spreading(&s, d)?;
        fits.push(serde_json::json!({
            "delta": d,
            "slope": f.slope,
            "slope_over_2lambda": f.slope / (2.0 * fp.lambda_plus_numeric),
            "r2": f.r2,
            "t_cross": f.t_cross,
        }));
    }
    out.diag("spreading", fits);
    if p.bool("correspondence") {
        let c: CorrespondenceParams = CorrespondenceParams {
            k: p.f64("q_k"),
            delta: p.f64("q_delta"),
            l: p.i64("q_l"),
            beta_samples: p.usize("q_beta_samples"),
            theta_samples: p.usize("q_theta_samples"),
            steps: p.usize("q_steps"),
            lattice: p.usize("q_lattice"),
            seed: p.seed,
        };
        let s = pseudoclassical::pseudoclassical_correspondence(&c)?;
        let q = s.column("J2_quantum").unwrap();
        let cl = s.column("J2_classical").unwrap();
        let worst = q.iter().zip(&cl).skip(1).map(|(a, b)| (a / b - 1.0).abs()).fold(0.0, f64::max);
        out.series("correspondence", &s)?;
        out.diag("correspondence_max_rel_diff", worst);
    }
    Ok(())
}

fn gauss_sums(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    let r = p.i64("r");
    let mut table = TimeSeries::new(&["s", "l", "re", "im", "abs"]);
    let mut summary = Vec::new();
    for s in 1..=p.i64("s_max") {
        let g = match pseudoclassical::gauss_sums(r, s) {
            Ok(g) => g,
            Err(Error::Usage(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        for (l, z) in g.g.iter().enumerate() {
            table.push(vec![s as f64, l as f64, z.re, z.im, z.norm()]);
        }
        summary.push(serde_json::json!({
            "s": s,
            "norm": g.g.iter().map(|z| z.norm_sqr()).sum::<f64>(),
            "nonzero": g.band_count(),
            "expected": pseudoclassical::GaussSums::expected_band_count(s),
        }));
    }
    out.series("gauss", &table)?;
    out.diag("bands", summary);
    Ok(())
}

fn dkr_spec(p: &Params) -> CliResult<ResonantDkrSpec> {
    Ok(ResonantDkrSpec::new(p.i64("r"), p.i64("s"), p.f64("k"))?)
}

fn chern_scan(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["s", "n_phi", "n_alpha"])?;
    let spec = dkr_spec(p)?;
    let grid = topology::band_spectrum(&spec, p.usize("n_phi"), p.usize("n_alpha"))?;
    out.diag("min_gap", grid.min_gap());
    out.diag("max_residual", grid.max_residual);
    out.diag("seams_consistent", grid.seams_consistent);
    for w in &grid.warnings {
        out.warn(format!("gap {:.2e} between bands {} and {}", w.gap, w.i, w.j));
    }
    let mut bands = TimeSeries::new(&["phi", "alpha", "band", "omega"]);
    for i in 0..grid.n_phi {
        for j in 0..grid.n_alpha {
            for (b, w) in grid.omega[grid.node(i, j)].iter().enumerate() {
                bands.push(vec![grid.phi(i), grid.alpha(j), b as f64, *w]);
            }
        }
    }
    out.series("bands", &bands)?;
    let field = topology::berry_curvature(&grid)?;
    out.series("curvature", &topology::curvature_table(&grid, &field))?;
    let c = topology::chern_numbers(&grid)?;
    out.diag("chern_sum", c.lattice.iter().sum::<i64>());
    out.diag("chern", c);
    Ok(())
}

fn thouless_pump(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["s", "d_f", "n_phi", "n_alpha"])?;
    let spec = dkr_spec(p)?;
    let mut pp: PumpParams = p.extract()?;
    if pp.l == 0 {
        pp.l = pp.d_f + 128;
    }
    let r = topology::thouless_pump(&spec, &pp)?;
    out.series("pump", &r.series)?;
    if r.adiabaticity_warning {
        out.warn(format!("adiabaticity: band leakage reached {:.3}", r.max_leakage));
    }
    out.diag("delta_i", r.delta_i);
    out.diag("predicted", r.predicted);
    out.diag("relative_error", (r.delta_i - r.predicted).abs() / r.predicted.abs().max(1.0));
    out.diag("max_leakage", r.max_leakage);
    out.diag("chern", r.chern);
    Ok(())
}

fn coupled_entanglement(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["l", "steps"])?;
    let spec: CoupledSpec = p.extract()?;
    let spec = CoupledSpec::new(spec.k1, spec.k2, spec.xi)?;
    let l = p.usize("l");
    let d = InitKind::Delta { m0: 0 };
    let init = TwoRotorState::from_inits(l, l, &d, &d)?;
    let steps = p.usize("steps");
    let times = coupled::record_times(steps, p.usize("dense"), p.usize("n_log"));
    let run = coupled::coupled_run(&spec, &init, &times)?;
    spill_warning(out, run.first_spill, run.max_edge);
    out.series("coupled", &run.series)?;
    out.diag("max_edge", run.max_edge);
    let late = (p.f64("late_lo"), steps as f64);
    match coupled::entanglement_laws(&run.series, late) {
        Ok(laws) => out.diag("laws", laws),
        Err(e) => out.warn(format!("growth-law fit: {e}")),
    }
    Ok(())
}

fn nh_spectrum(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["l"])?;
    let (k, l) = (p.f64("k"), p.usize("l"));
    let periods = p.f64_list("periods");
    for (i, &t) in periods.iter().enumerate() {
        let mut summary = TimeSeries::new(&["gamma", "mean_abs_log", "mean_gain", "max_log"]);
        for (j, &g) in p.f64_list("gammas").iter().enumerate() {
            let s = nonhermitian::nh_floquet_spectrum(k, t, g, l)?;
            out.series(&format!("spectrum_{i}_{j}"), &s.table())?;
            summary.push(vec![g, s.mean_abs_log(), s.mean_gain(), s.max_log_abs()]);
        }
        out.series(&format!("summary_{i}"), &summary)?;
    }
    if let Some(&t) = periods.first() {
        let th = nonhermitian::pt_threshold(k, t, l, &p.f64_list("threshold_grid"))?;
        if let (Some(g), Some(theory)) = (th.gamma_pt, th.theory) {
            out.diag("threshold_over_theory", g / theory);
        }
        out.diag("threshold", th);
    }
    Ok(())
}

fn nh_ratchet(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["l", "steps"])?;
    let s = nonhermitian::ratchet_series(p.f64("k"), p.f64("period"), p.f64("gamma"), p.usize("steps"), p.usize("l"))?;
    out.series("ratchet", &s)?;
    match nonhermitian::fit_ratchet(s) {
        Ok(f) => {
            out.diag("ratchet", true);
            out.diag("v", f.v);
            out.diag("r2", f.r2);
        }
        Err(Error::NoRatchet { r2, slope }) => {
            out.diag("ratchet", false);
            out.diag("v", slope);
            out.diag("r2", r2);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn kepler_threshold(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["n0", "n_traj", "steps", "grid_points", "span"])?;
    let n0 = p.f64("n0");
    let span = p.f64("span");
    let mut table = TimeSeries::new(&["omega0", "eps_threshold", "eps0c", "eps_q"]);
    for (i, &w0) in p.f64_list("omega0s").iter().enumerate() {
        let c = kepler::classical_chaos_border(w0);
        let grid = kepler::geometric_grid(c / span, c * span, p.usize("grid_points"));
        let r = kepler::ionization_threshold(w0, n0, &grid, p.usize("n_traj"), p.usize("steps"), p.seed)?;
        out.series(&format!("scan_{i}"), &r.scan)?;
        table.push(vec![w0, r.eps_threshold.unwrap_or(f64::NAN), r.eps0c, r.eps_q]);
        if r.eps_threshold.is_none() {
            out.warn(format!("no threshold inside the scan at omega0 = {w0}"));
        }
    }
    out.series("thresholds", &table)?;
    let ratios: Vec<f64> = table.rows.iter().map(|r| r[1] / r[2]).collect();
    out.diag("threshold_over_border", ratios);
    Ok(())
}

fn quasiperiodic_transition(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["l", "steps", "hbar_eff"])?;
    let q: QuasiperiodicParams = p.extract()?;
    let r = quantum::quasiperiodic_run(&q)?;
    spill_warning(out, r.first_spill, r.max_edge);
    out.series("series", &r.series)?;
    let t = r.series.column("t").unwrap();
    let e = r.series.column("energy").unwrap();
    if let Ok(g) = diagnostics::fit_growth_law(&t, &e, (0.1 * q.steps as f64, q.steps as f64)) {
        out.diag("growth", g);
    }
    Ok(())
}

fn qhe_energy_growth(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["l", "steps", "theta2_samples", "hbar_eff"])?;
    let q: QheParams = p.extract()?;
    let s = quantum::spinor_qhe_run(&q)?;
    out.series("qhe", &s)?;
    let t = s.column("t").unwrap();
    let e = s.column("energy").unwrap();
    if let Ok(g) = diagnostics::fit_growth_law(&t, &e, (0.25 * q.steps as f64, q.steps as f64)) {
        out.diag("growth", g);
    }
    Ok(())
}

fn sawtooth_localization(p: &Params, out: &mut RunOutput) -> CliResult<()> {
    positive(p, &["l", "steps", "period"])?;
    let mut spec = FloquetSpec::kicked_rotor(0.0, p.f64("period"));
    spec.potential = KickPotential::Sawtooth { k: p.f64("k") };
    localization_run(&spec, p.usize("l"), p.usize("steps"), p.usize("record_every"), &InitKind::Delta { m0: 0 }, out)?;
    out.diag("k_classical", p.f64("k") * p.f64("period"));
    Ok(())
}
