use std::path::Path;

use pwaq_core::certify::{
    check_conditions, input_constants, state_constants, verify_certificate, zoom_rate, PwqCertificate,
    QuantizationMode, StabilityConstants, TuningParams,
};
use pwaq_core::linalg::{euclid, Vector};
use pwaq_core::model::{AffineController, InputPolytope};
use pwaq_core::optim::{LpOptions, SdpOptions};
use pwaq_core::polytope::HPolytope;
use pwaq_core::reach::{confinement_check, successor_map, Channel, Method, SuccessorMap};
use pwaq_core::runtime::{simulate_disturbed, simulate_input_q, simulate_state_q, DisturbanceSource, ProtocolFailure, SimConfig, SimMode, StopReason, Trace};
use pwaq_core::synth::{find_certificate, synthesize, SynthesisOptions, SynthesisProblem, Variant};
use pwaq_core::Error;

use crate::args::*;
use crate::files::{to_rows, Loaded, PolyFile, SystemFile};
use crate::plot::trajectory_svg;
use crate::report::*;
use crate::{lp_options, CliError, EXIT_CERTIFICATE, EXIT_OK, EXIT_PROTOCOL, EXIT_SOLVER, EXIT_SYNTHESIS};

/// Text for stdout plus the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Reach(a) => cmd_reach(&a),
        Command::Certify(a) => cmd_certify(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    }
}

fn channel_of(c: ChannelArg) -> Channel {
    match c {
        ChannelArg::D => Channel::Physical,
        ChannelArg::B => Channel::Input,
        ChannelArg::Bk => Channel::State,
    }
}

fn channel_name(c: ChannelArg) -> &'static str {
    match c {
        ChannelArg::D => "D",
        ChannelArg::B => "B",
        ChannelArg::Bk => "BK",
    }
}

fn quant_mode(m: QuantModeArg) -> QuantizationMode {
    match m {
        QuantModeArg::Input => QuantizationMode::Input,
        QuantModeArg::State => QuantizationMode::State,
    }
}

fn mode_name(m: QuantizationMode) -> &'static str {
    match m {
        QuantizationMode::Input => "input",
        QuantizationMode::State => "state",
    }
}

/// Reads the system file, overlaying controller and pieces from `artifact`.
pub fn read_system(file: &Path, artifact: Option<&Path>, lp: &LpOptions) -> Result<(SystemFile, Loaded), CliError> {
    let mut sf = SystemFile::read(file)?;
    if let Some(a) = artifact {
        let art = SystemFile::read(a)?;
        if art.controller.is_some() {
            sf.controller = art.controller;
        }
        if art.lyapunov.is_some() {
            sf.lyapunov = art.lyapunov;
        }
    }
    let loaded = sf.load(lp)?;
    Ok((sf, loaded))
}

fn require_controller(l: &Loaded, why: &str) -> Result<AffineController, CliError> {
    l.controller.clone().ok_or_else(|| CliError::validation(format!("field `controller` is required for {why}")))
}

fn check_delta(d: f64) -> Result<f64, CliError> {
    if d >= 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(CliError::validation(format!("disturbance bound must be non-negative, got {d}")))
    }
}

pub fn cmd_reach(a: &ReachArgs) -> Result<Outcome, CliError> {
    let lp = lp_options()?;
    let (_, l) = read_system(&a.file, None, &lp)?;
    let delta = check_delta(a.delta.unwrap_or(l.quantizer.delta))?;
    let channel = channel_of(a.channel);
    let (method, name) = match a.method {
        MethodArg::Sbar => (Method::SbarExact, "sbar"),
        MethodArg::Stilde => (Method::StildeFast, "stilde"),
        MethodArg::Tfree => (Method::TControllerFree, "tfree"),
    };
    let ctrl = match method {
        Method::TControllerFree => l.controller.clone().unwrap_or_else(|| {
            AffineController::linear(vec![pwaq_core::linalg::Mat::zeros(l.system.input_dim(), l.system.state_dim()); l.system.num_cells()])
        }),
        _ => require_controller(&l, "methods sbar and stilde")?,
    };
    let map = successor_map(&l.system, &ctrl, delta, channel, method, l.input.as_ref(), &lp)?;
    let report = ReachReport {
        schema_version: SCHEMA_VERSION,
        command: "reach".into(),
        method: name.into(),
        channel: if method == Method::TControllerFree { "D".into() } else { channel_name(a.channel).into() },
        delta,
        successors: one_based(&map),
    };
    Ok(Outcome { stdout: to_json(&report), code: EXIT_OK })
}

/// A certificate for the loaded controller plus the matching constants.
pub struct Certified {
    pub certificate: PwqCertificate,
    pub constants: StabilityConstants,
    pub map: SuccessorMap,
    pub source: &'static str,
    pub kappa: Option<f64>,
}

pub fn certify_loaded(
    l: &Loaded,
    ctrl: &AffineController,
    mode: QuantizationMode,
    params: TuningParams,
    lp: &LpOptions,
) -> Result<Certified, CliError> {
    let sdp = SdpOptions::default();
    let channel = match mode {
        QuantizationMode::Input => Channel::Input,
        QuantizationMode::State => Channel::State,
    };
    let map = successor_map(&l.system, ctrl, l.quantizer.delta, channel, Method::SbarExact, None, lp)?;
    let constants_for = |cert: &PwqCertificate| -> Result<StabilityConstants, Error> {
        match mode {
            QuantizationMode::Input => input_constants(cert, &l.system, ctrl, &l.quantizer, params),
            QuantizationMode::State => state_constants(cert, &l.system, ctrl, &l.quantizer, params),
        }
    };
    match &l.lyapunov {
        Some(v) => {
            let certificate = verify_certificate(&l.system, ctrl, v, &map, &sdp)?;
            let constants = constants_for(&certificate)?;
            Ok(Certified { certificate, constants, map, source: "file", kappa: None })
        }
        None => {
            let found = find_certificate(&l.system, ctrl, &map, &l.quantizer, mode, params, &sdp).map_err(|e| match e {
                Error::Infeasible => CliError::new(EXIT_CERTIFICATE, "no quadratic certificate found for the controller"),
                other => other.into(),
            })?;
            Ok(Certified { certificate: found.certificate, constants: found.constants, map, source: "search", kappa: Some(found.kappa) })
        }
    }
}

pub fn cmd_certify(a: &CertifyArgs) -> Result<Outcome, CliError> {
    let lp = lp_options()?;
    let (_, l) = read_system(&a.file, a.artifact.as_deref(), &lp)?;
    let ctrl = require_controller(&l, "certify")?;
    let params = TuningParams { eps: a.eps, delta: a.delta_param };
    let mode = quant_mode(a.mode);
    let c = certify_loaded(&l, &ctrl, mode, params, &lp)?;
    let cond = check_conditions(&c.constants, &l.system, &ctrl);
    let omega = zoom_rate(&c.constants).ok();
    let checks = vec![
        Check::new("certificate", true),
        Check::new("gap", cond.gap_ok),
        Check::new("invariance", cond.invariance_ok),
        Check::new("zoom_contracts", omega.is_some_and(|w| w < 1.0)),
    ];
    let code = if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_CERTIFICATE };
    let report = CertifyReport {
        schema_version: SCHEMA_VERSION,
        command: "certify".into(),
        mode: mode_name(mode).into(),
        eps: a.eps,
        delta_param: a.delta_param,
        lyapunov_source: c.source.into(),
        kappa: c.kappa,
        successor_map: one_based(&c.map),
        pair_rates: c
            .certificate
            .pair_gamma
            .iter()
            .map(|((i, j), r)| PairRate { source: i + 1, target: j + 1, rate: *r })
            .collect(),
        constants: Constants::new(&c.constants, omega),
        conditions: cond.into(),
        checks,
    };
    Ok(Outcome { stdout: to_json(&report), code })
}

/// Parses `I:TARGET` into zero-based cells and a target polytope.
pub fn parse_confine(spec: &str, l: &Loaded, base: &Path) -> Result<(Vec<usize>, HPolytope, String), CliError> {
    let (cell, target) = spec
        .split_once(':')
        .ok_or_else(|| CliError::validation(format!("confinement {spec:?} is not of the form I:TARGET")))?;
    let s = l.system.num_cells();
    let cells = if cell.eq_ignore_ascii_case("all") {
        (0..s).collect()
    } else {
        let i: usize = cell.trim().parse().map_err(|_| CliError::validation(format!("confinement cell {cell:?} is not a number")))?;
        if i == 0 || i > s {
            return Err(CliError::validation(format!("confinement cell {i} outside 1..={s}")));
        }
        vec![i - 1]
    };
    let t = target.trim();
    let poly = if t == "X" {
        l.system.total_space().clone()
    } else if let Some(j) = t.strip_prefix("cell").and_then(|j| j.parse::<usize>().ok()) {
        if j == 0 || j > s {
            return Err(CliError::validation(format!("confinement target cell {j} outside 1..={s}")));
        }
        l.system.cell(j - 1).region.clone()
    } else {
        let p = Path::new(t);
        let p = if p.is_relative() && !p.exists() { base.join(p) } else { p.to_path_buf() };
        PolyFile::load(&p, l.system.state_dim())?
    };
    Ok((cells, poly, t.to_string()))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<Outcome, CliError> {
    let lp = lp_options()?;
    let (sf, l) = read_system(&a.file, None, &lp)?;
    let delta = check_delta(a.delta.unwrap_or(l.quantizer.delta))?;
    let channel = channel_of(a.channel);
    let variant = match a.variant {
        VariantArg::Asym => Variant::Asymptotic,
        VariantArg::Iss => Variant::Iss { nu1: a.nu1, nu2: a.nu2 },
    };
    let base = a.file.parent().unwrap_or(Path::new("."));
    let mut prob = SynthesisProblem::new(l.system.clone(), delta, channel, variant);
    if let Some(u) = &l.input {
        prob = prob.with_input(u.clone());
    }
    let mut declared = Vec::new();
    for spec in &a.confine {
        let (cells, poly, name) = parse_confine(spec, &l, base)?;
        for i in cells {
            prob = prob.confine(i, poly.clone());
            declared.push((i, poly.clone(), name.clone()));
        }
    }
    let opts = SynthesisOptions { max_iter: a.max_iter, lp, ..SynthesisOptions::default() };
    let res = synthesize(&prob, &opts).map_err(|e| {
        let mut err = CliError::from(e);
        if err.code == EXIT_SOLVER {
            err.code = EXIT_SYNTHESIS;
            err.message = format!("synthesis failed: {}", err.message);
        }
        err
    })?;
    let ctrl = res.controller.clone();
    let mut confinements = Vec::new();
    for (i, poly, name) in &declared {
        let pass = confinement_check(&l.system, &ctrl, *i, poly, delta, channel, &lp)?;
        confinements.push(ConfinementResult { cell: i + 1, target: name.clone(), pass });
    }
    let (lyapunov, omega_state, omega_ccl) = refine_certificate(&l, &ctrl, &res.certificate, &res.map);
    let mut artifact = sf.clone();
    artifact.set_controller(&ctrl);
    artifact.set_lyapunov(&lyapunov);
    let artifact_path = match &a.out {
        Some(p) => {
            std::fs::write(p, artifact.to_json()).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
            Some(p.display().to_string())
        }
        None => None,
    };
    let checks = vec![
        Check::new("certificate", true),
        Check::new("residual", res.residual.abs() <= opts.ccl_tol),
        Check::new("confinements", confinements.iter().all(|c| c.pass)),
    ];
    let code = if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_SYNTHESIS };
    let report = SynthReport {
        schema_version: SCHEMA_VERSION,
        command: "synth".into(),
        variant: match a.variant {
            VariantArg::Asym => "asym".into(),
            VariantArg::Iss => "iss".into(),
        },
        status: if code == EXIT_OK { "feasible".into() } else { "failed".into() },
        rounds: res.rounds,
        iterations: res.iterations,
        trace: res.trace,
        residual: res.residual,
        gains: ctrl.k.iter().map(to_rows).collect(),
        successor_map: one_based(&res.map),
        confinements,
        omega_state,
        omega_ccl,
        artifact: artifact_path,
        checks,
    };
    Ok(Outcome { stdout: to_json(&report), code })
}

/// The CCL pieces certify the gains but stop at the first feasible point,
/// so their decrease margin is thin. A fixed-gain search over the same map
/// usually gives a larger margin; keep whichever passes the state-mode
/// conditions with the smaller zoom rate.
fn refine_certificate(
    l: &Loaded,
    ctrl: &AffineController,
    cert: &PwqCertificate,
    map: &SuccessorMap,
) -> (pwaq_core::certify::LyapunovFunction, Option<f64>, Option<f64>) {
    let score = |c: &StabilityConstants| {
        let ok = check_conditions(c, &l.system, ctrl).all_ok();
        zoom_rate(c).ok().map(|w| (ok, w))
    };
    let base = state_constants(cert, &l.system, ctrl, &l.quantizer, TuningParams::default()).ok().and_then(|c| score(&c));
    let omega_ccl = base.map(|(_, w)| w);
    let found = find_certificate(&l.system, ctrl, map, &l.quantizer, QuantizationMode::State, TuningParams::default(), &SdpOptions::default())
        .ok()
        .and_then(|f| score(&f.constants).map(|s| (f.certificate.lyapunov, s)));
    let better = |a: (bool, f64), b: Option<(bool, f64)>| match b {
        None => true,
        Some(b) => (a.0 && !b.0) || (a.0 == b.0 && a.1 < b.1),
    };
    match found {
        Some((v, s)) if better(s, base) => (v, Some(s.1), omega_ccl),
        _ => (cert.lyapunov.clone(), omega_ccl, omega_ccl),
    }
}

pub fn parse_state(s: &str, n: usize) -> Result<Vector, CliError> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|_| CliError::validation(format!("initial state {s:?} is not a comma-separated list of numbers")))?;
    if vals.len() != n {
        return Err(CliError::validation(format!("initial state has {} entries, expected {n}", vals.len())));
    }
    Ok(Vector::from_vec(vals))
}

fn failure_text(f: &ProtocolFailure) -> String {
    match f {
        ProtocolFailure::Saturation { k } => format!("saturation at step {k}"),
        ProtocolFailure::DomainExit { k } => format!("state left the domain at step {k}"),
        ProtocolFailure::InterEventOverrun { k } => format!("no zoom event within the bound at step {k}"),
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// CSV with one row per step; the column set depends on the loop.
pub fn trace_csv(trace: &Trace, n: usize, m: usize) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let qn = trace.records.first().map_or(0, |r| r.q.len());
    let dn = trace.records.first().map_or(0, |r| r.err.len());
    let mut header = vec!["k".to_string(), "mode".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.push("mu".into());
    header.extend((1..=qn).map(|i| format!("q{i}")));
    header.extend((1..=dn).map(|i| format!("d{i}")));
    header.extend(["zoom_event", "requantized", "saturation"].map(String::from));
    let io = |e: csv::Error| CliError::validation(format!("csv: {e}"));
    w.write_record(&header).map_err(io)?;
    for r in &trace.records {
        let mut row = vec![r.k.to_string(), (r.mode + 1).to_string()];
        row.extend(r.x.iter().map(|v| fmt_num(*v)));
        row.extend(r.u.iter().map(|v| fmt_num(*v)));
        row.push(fmt_num(r.mu));
        row.extend(r.q.iter().map(|v| fmt_num(*v)));
        row.extend(r.err.iter().map(|v| fmt_num(*v)));
        row.extend([r.zoom_event, r.requantized, r.saturation].map(|b| u8::from(b).to_string()));
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::validation(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let lp = lp_options()?;
    let (_, l) = read_system(&a.file, a.artifact.as_deref(), &lp)?;
    let ctrl = require_controller(&l, "simulate")?;
    let sys = &l.system;
    let x0 = parse_state(&a.x0, sys.state_dim())?;
    if !sys.total_space().contains(&x0, pwaq_core::model::TIE_TOL)? {
        return Err(CliError::validation("initial state lies outside the total state space"));
    }
    let mut cfg = SimConfig::new(x0);
    cfg.max_steps = a.steps;
    cfg.mu0 = a.mu0;
    cfg.requantize = a.requantize;
    let params = TuningParams { eps: a.eps, delta: a.delta_param };
    let (trace, conditions) = match a.mode {
        SimModeArg::Disturbed => {
            let delta = check_delta(a.delta.unwrap_or(l.quantizer.delta))?;
            let source = match a.source {
                SourceArg::Uniform => DisturbanceSource::Uniform { seed: a.seed },
                SourceArg::Corner => DisturbanceSource::WorstCorner,
            };
            (simulate_disturbed(sys, &ctrl, &cfg, delta, &source)?, None)
        }
        SimModeArg::Input | SimModeArg::State => {
            let mode = if a.mode == SimModeArg::Input { QuantizationMode::Input } else { QuantizationMode::State };
            let c = certify_loaded(&l, &ctrl, mode, params, &lp)?;
            let cond = check_conditions(&c.constants, sys, &ctrl);
            if !cond.all_ok() && !a.force {
                return Err(CliError::new(
                    EXIT_CERTIFICATE,
                    format!(
                        "stability conditions fail (gap slack {:.3e}, invariance slack {:.3e}); pass --force to run anyway",
                        cond.gap_slack, cond.invariance_slack
                    ),
                ));
            }
            let t = match mode {
                QuantizationMode::Input => simulate_input_q(sys, &ctrl, &c.constants, &cfg, &lp)?,
                QuantizationMode::State => simulate_state_q(sys, &ctrl, &c.constants, &cfg, &lp)?,
            };
            (t, Some(Conditions::from(cond)))
        }
    };
    let csv_path = match &a.csv {
        Some(p) => {
            let text = trace_csv(&trace, sys.state_dim(), sys.input_dim())?;
            std::fs::write(p, text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
            Some(p.display().to_string())
        }
        None => None,
    };
    let mut states: Vec<Vector> = trace.records.iter().map(|r| r.x.clone()).collect();
    if let Some(x) = trace.final_state() {
        states.push(x.clone());
    }
    let svg_path = match &a.svg {
        Some(p) if sys.state_dim() == 2 => {
            let svg = trajectory_svg(sys, &states, &lp)?;
            std::fs::write(p, svg).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
            Some(p.display().to_string())
        }
        _ => None,
    };
    let last = states.last().cloned().unwrap_or_else(|| Vector::zeros(sys.state_dim()));
    let failures: Vec<String> = trace.failures.iter().map(failure_text).collect();
    let report = SimulateReport {
        schema_version: SCHEMA_VERSION,
        command: "simulate".into(),
        mode: match trace.mode {
            SimMode::InputQ => "input".into(),
            SimMode::StateQ => "state".into(),
            SimMode::Disturbed => "disturbed".into(),
        },
        steps: trace.records.len(),
        stop: match trace.stop {
            StopReason::Converged => "converged".into(),
            StopReason::MaxSteps => "max_steps".into(),
            StopReason::DomainExit => "domain_exit".into(),
        },
        final_norm: euclid(&last),
        final_state: last.iter().copied().collect(),
        zoom_events: trace.records.iter().filter(|r| r.zoom_event).count(),
        requantized: trace.records.iter().filter(|r| r.requantized).count(),
        omega: trace.omega,
        conditions,
        failures,
        trigger_uses_true_state: trace.trigger_uses_true_state,
        csv: csv_path,
        svg: svg_path,
    };
    let code = if trace.ok() || a.force { EXIT_OK } else { EXIT_PROTOCOL };
    Ok(Outcome { stdout: to_json(&report), code })
}

/// Input polytope `{u : |u|∞ ≤ r}`.
pub fn box_inputs(m: usize, r: f64, lp: &LpOptions) -> Result<InputPolytope, CliError> {
    let p = HPolytope::hypercube(m, r);
    Ok(InputPolytope::new(p.u().clone(), p.v().clone(), lp)?)
}
