//! Subcommand implementations. Each returns the process exit code.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::{info, warn};
use serde::Serialize;

use nesh_core::dos::{self, DosTrace};
use nesh_core::protocol::{write_csv, Protocol, RunOptions, Summary};
use nesh_core::tuner::{synthesize_with, Synthesis};
use nesh_core::{sweep, verify};

use crate::config::{DesignSection, RunConfig, Scenario, Setting, TraceSource};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_SATURATED: u8 = 3;
pub const EXIT_BEYOND_RESILIENCE: u8 = 4;

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_INVALID, error: error.into() }
    }

    pub fn failure(error: impl Into<anyhow::Error>) -> Self {
        Self { code: EXIT_FAILURE, error: error.into() }
    }
}

pub type CmdResult = Result<u8, CliError>;

fn synthesize(cfg: &RunConfig) -> Result<(Scenario, Synthesis), CliError> {
    let sc = cfg.scenario().map_err(CliError::invalid)?;
    let syn = synthesize_with(&sc.game, &sc.topology, &sc.bounds, &sc.overrides).map_err(CliError::invalid)?;
    Ok((sc, syn))
}

#[derive(Serialize)]
struct DesignOut {
    design: DesignSection,
}

pub fn cmd_tune(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let (sc, syn) = synthesize(cfg)?;
    let p = syn.params;
    let c = syn.constants;
    let lines = [
        ("n_players", sc.game.n_players().to_string()),
        ("l", c.lipschitz_l.to_string()),
        ("mu", c.monotonicity_mu.to_string()),
        ("h_max", syn.h_max.to_string()),
        ("h", p.h.to_string()),
        ("norm_H", syn.norms.h.to_string()),
        ("norm_G", syn.norms.g.to_string()),
        ("norm_S", syn.norms.s.to_string()),
        ("norm_A0", syn.norms.a0.to_string()),
        ("delta", p.delta.to_string()),
        ("B_delta", syn.b_margin.to_string()),
        ("rho_hbar", syn.rho_hbar.to_string()),
        ("gamma1", p.gamma1.to_string()),
        ("gamma", p.gamma_decay.to_string()),
        ("c_gamma", p.c_gamma.to_string()),
        ("theta0", p.theta0.to_string()),
        ("c_x0", sc.bounds.c_x0.to_string()),
        ("c_xstar", sc.bounds.c_xstar.to_string()),
        ("C", p.c_bound.to_string()),
        ("A_x", syn.levels.a_x.to_string()),
        ("A_y", syn.levels.a_y.to_string()),
        ("R_x", p.r_x.to_string()),
        ("R_y", p.r_y.to_string()),
        ("mu_variant_feasible", syn.mu_variant_feasible.to_string()),
        ("gradient_step_ok", syn.gradient_step_ok.to_string()),
    ];
    let io = |e: io::Error| CliError::failure(e);
    for (k, v) in lines {
        writeln!(out, "{k}={v}").map_err(io)?;
    }
    let section = DesignOut {
        design: DesignSection {
            h: Setting::Value(p.h),
            delta: Setting::Value(p.delta),
            gamma1: Setting::Value(p.gamma1),
            c_bound: Setting::Value(p.c_bound),
            r_x: Setting::Value(p.r_x),
            r_y: Setting::Value(p.r_y),
        },
    };
    let toml = toml::to_string(&section).map_err(CliError::failure)?;
    writeln!(out, "\n# synthesized constants, mergeable into a run config\n{toml}").map_err(io)?;
    Ok(EXIT_OK)
}

/// Arguments of `gen-dos`.
#[derive(Debug, Clone)]
pub struct GenDosArgs {
    pub duty: f64,
    pub period: f64,
    pub horizon: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Sampling period used for the resilience margin.
    pub delta: f64,
    pub resolution: f64,
    pub tau_d_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
}

pub fn cmd_gen_dos(args: &GenDosArgs, out: &mut dyn Write) -> CmdResult {
    let trace = dos::generate(args.duty, args.period, args.horizon, args.seed).map_err(CliError::invalid)?;
    if let Some(path) = &args.out {
        fs::write(path, trace.to_text())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::failure)?;
    }
    report_trace(&trace, args.delta, args.resolution, &args.tau_d_grid, &args.t_grid, out)
        .map_err(CliError::failure)?;
    Ok(EXIT_OK)
}

/// Resilience margin `1/T + delta/tau_D` from averaged parameters.
fn margin_of(trace: &DosTrace, delta: f64) -> f64 {
    let (tau_d, t) = trace.averaged_params();
    1.0 / t + delta / tau_d
}

fn report_trace(
    trace: &DosTrace,
    delta: f64,
    resolution: f64,
    tau_d_grid: &[f64],
    t_grid: &[f64],
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let (tau_d, t) = trace.averaged_params();
    let margin = margin_of(trace, delta);
    writeln!(out, "horizon={}", trace.horizon())?;
    writeln!(out, "transitions={}", trace.n_transitions())?;
    writeln!(out, "dos_measure={}", trace.total_duration())?;
    writeln!(out, "duty_observed={}", trace.total_duration() / trace.horizon())?;
    writeln!(out, "tau_d_avg={tau_d}")?;
    writeln!(out, "T_avg={t}")?;
    if t > 1.0 {
        let p = trace.certify(tau_d, t, resolution)?;
        writeln!(out, "eta_at_tau_d_avg={}", p.eta)?;
        writeln!(out, "kappa_at_T_avg={}", p.kappa)?;
    }
    for &td in tau_d_grid {
        let p = trace.certify(td, 2.0, resolution)?;
        writeln!(out, "eta[tau_d={td}]={}", p.eta)?;
    }
    for &tt in t_grid {
        let p = trace.certify(1e300, tt, resolution)?;
        writeln!(out, "kappa[T={tt}]={}", p.kappa)?;
    }
    writeln!(out, "resilience_margin={margin}")?;
    writeln!(out, "resilient={}", margin < 1.0)?;
    Ok(())
}

/// Arguments of `run`.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub trace: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub decimation: Option<u64>,
    /// Run this many consecutive seeds instead of one.
    pub sweep: Option<u64>,
    pub dual_codec: bool,
}

fn load_trace(path: &Path) -> Result<DosTrace, CliError> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(CliError::failure)?;
    DosTrace::from_text(&text).with_context(|| format!("parsing {}", path.display())).map_err(CliError::invalid)
}

fn trace_for(cfg: &RunConfig, explicit: Option<&Path>, seed: Option<u64>) -> Result<DosTrace, CliError> {
    if let Some(path) = explicit {
        return load_trace(path);
    }
    match cfg.trace_source(seed) {
        TraceSource::File(path) => load_trace(&path),
        TraceSource::Generated { duty, period, seed } => {
            dos::generate(duty, period, cfg.horizon_seconds(), seed).map_err(CliError::invalid)
        }
    }
}

fn print_summary(out: &mut dyn Write, label: &str, s: &Summary, margin: f64) -> io::Result<()> {
    let sat = match s.first_saturation {
        Some(k) => format!("at_step_{k} saturation_events={}", s.saturation_events),
        None => "never".to_string(),
    };
    writeln!(
        out,
        "{label}steps={} successes={} resilience_margin={margin} initial_err={:e} final_err={:e} min_theta={:e} max_qarg_x={} max_qarg_y={} saturated={sat}",
        s.steps, s.successes, s.initial_err, s.final_err, s.min_theta, s.max_qarg_x, s.max_qarg_y
    )
}

pub fn cmd_run(cfg: &RunConfig, args: &RunArgs, out: &mut dyn Write) -> CmdResult {
    let (sc, syn) = synthesize(cfg)?;
    let protocol = Protocol::new(sc.game.clone(), sc.topology.clone(), syn.params).map_err(CliError::invalid)?;
    let delta = cfg.sim.delta_seconds;
    let k = cfg.sim.horizon_steps;
    let decimation = args.decimation.unwrap_or(cfg.sim.record_decimation).max(1);
    let options = RunOptions { decimation, dual_codec: args.dual_codec };
    let io = |e: io::Error| CliError::failure(e);

    let mut beyond = false;
    let mut saturated = false;
    if let Some(count) = args.sweep {
        if args.trace.is_some() || matches!(cfg.trace_source(None), TraceSource::File(_)) {
            return Err(CliError::invalid(anyhow!("--sweep needs generated traces, not a trace file")));
        }
        let base = args.seed.or(cfg.dos.seed).unwrap_or(cfg.sim.seed);
        let seeds: Vec<u64> = (base..base + count).collect();
        let results = sweep::map(&seeds, |&seed| -> Result<(f64, Summary), CliError> {
            let trace = trace_for(cfg, None, Some(seed))?;
            let mask = trace.sample_mask(delta, k).map_err(CliError::invalid)?;
            let s = protocol.run_observed(&sc.x0, &mask, options, |_, _| {}).map_err(CliError::failure)?;
            Ok((margin_of(&trace, delta), s))
        });
        for (seed, r) in seeds.iter().zip(results) {
            let (margin, s) = r?;
            beyond |= margin >= 1.0;
            saturated |= s.saturation_events > 0;
            print_summary(out, &format!("seed={seed} "), &s, margin).map_err(io)?;
        }
    } else {
        let trace = trace_for(cfg, args.trace.as_deref(), args.seed)?;
        let mask = trace.sample_mask(delta, k).map_err(CliError::invalid)?;
        let margin = margin_of(&trace, delta);
        if margin >= 1.0 {
            warn!("1/T + delta/tau_D = {margin} >= 1: beyond maximum resilience, convergence is not expected");
        }
        let run = protocol.run(&sc.x0, &mask, options).map_err(CliError::failure)?;
        if let Some(path) = &args.out {
            let file = fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))
                .map_err(CliError::failure)?;
            write_csv(BufWriter::new(file), protocol.n(), &run.records).map_err(io)?;
            info!("wrote {} records to {}", run.records.len(), path.display());
        }
        beyond = margin >= 1.0;
        saturated = run.summary.saturation_events > 0;
        print_summary(out, "", &run.summary, margin).map_err(io)?;
    }
    Ok(if beyond {
        EXIT_BEYOND_RESILIENCE
    } else if saturated {
        EXIT_SATURATED
    } else {
        EXIT_OK
    })
}

/// Tolerance of the oracle-equivalence suites.
pub const ORACLE_TOL: f64 = 1e-9;

pub fn cmd_verify(cfg: &RunConfig, steps: u64, seed: Option<u64>, out: &mut dyn Write) -> CmdResult {
    let (sc, syn) = synthesize(cfg)?;
    let protocol = Protocol::new(sc.game.clone(), sc.topology.clone(), syn.params).map_err(CliError::invalid)?;
    let delta = cfg.sim.delta_seconds;
    let steps = steps.min(cfg.sim.horizon_steps);
    let trace = trace_for(cfg, None, seed)?;
    let mask = trace.sample_mask(delta, steps).map_err(CliError::invalid)?;
    let mut ok = true;
    let mut line = |name: &str, pass: bool, detail: String| -> io::Result<()> {
        ok &= pass;
        writeln!(out, "[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" })
    };
    let io = |e: io::Error| CliError::failure(e);

    let suite = verify::random_oracle_suite(seed.unwrap_or(cfg.sim.seed), 50, steps.min(200) as usize)
        .map_err(CliError::failure)?;
    line(
        "oracle equivalence (random games)",
        suite.comparison.max_deviation < ORACLE_TOL,
        format!("runs={} max_deviation={:e}", suite.runs, suite.comparison.max_deviation),
    )
    .map_err(io)?;

    let cmp = verify::oracle_comparison(&protocol, &sc.x0, &mask).map_err(CliError::failure)?;
    line(
        "oracle equivalence (configured scenario)",
        cmp.max_deviation < ORACLE_TOL && cmp.max_theta_deviation < 1e-12,
        format!(
            "steps={steps} max_deviation={:e} max_theta_deviation={:e}",
            cmp.max_deviation, cmp.max_theta_deviation
        ),
    )
    .map_err(io)?;

    let checks = verify::run_checks(&protocol, &sc.x0, &mask).map_err(CliError::failure)?;
    let bound = 0.5 / syn.params.gamma1;
    line(
        "encoder/decoder synchrony, freeze and theta identity",
        checks.freeze_violations == 0 && checks.hold_violations == 0 && checks.theta_rel_err < 1e-12,
        format!(
            "freeze_violations={} hold_violations={} theta_rel_err={:e}",
            checks.freeze_violations, checks.hold_violations, checks.theta_rel_err
        ),
    )
    .map_err(io)?;
    line(
        "scaled quantization error at successful transmissions",
        checks.saturation_events > 0 || checks.max_scaled_error <= bound,
        format!("max={} bound={bound} saturation_events={}", checks.max_scaled_error, checks.saturation_events),
    )
    .map_err(io)?;
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}
