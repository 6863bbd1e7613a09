//! Closed-loop simulation with zooming quantizers.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certify::{zoom_rate, QuantizationMode, StabilityConstants};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{euclid, Mat, Vector};
use crate::model::{AffineController, PwaSystem, UniformQuantizer};
use crate::optim::lp::LpOptions;
use crate::polytope::HPolytope;
use crate::reach::box_corners;
#[allow(unused_imports)] // method resolution differs once std is linked
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    InputQ,
    StateQ,
    Disturbed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSource {
    /// Independent uniform draws in `[−Δ, Δ]` per coordinate.
    Uniform { seed: u64 },
    /// Cycles through the corners of the disturbance box.
    WorstCorner,
    /// Replays the given sequence, wrapping around.
    Fixed(Vec<Vector>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub x0: Vector,
    pub max_steps: usize,
    pub mu0: f64,
    pub stop_radius: f64,
    pub requantize: bool,
}

impl SimConfig {
    pub fn new(x0: Vector) -> Self {
        SimConfig { x0, max_steps: 10_000, mu0: 1.0, stop_radius: 1e-6, requantize: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub x: Vector,
    pub mode: usize,
    /// Input actually applied to the plant.
    pub u: Vector,
    /// Zoom in force when the value was transmitted.
    pub mu: f64,
    /// Transmitted (possibly requantized) value; empty in the disturbed loop.
    pub q: Vector,
    /// Quantization error `q − ξ`, or the disturbance `d_k`.
    pub err: Vector,
    pub zoom_event: bool,
    pub requantized: bool,
    pub saturation: bool,
    pub x_next: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolFailure {
    Saturation { k: usize },
    DomainExit { k: usize },
    InterEventOverrun { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxSteps,
    DomainExit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub mode: SimMode,
    pub records: Vec<StepRecord>,
    pub failures: Vec<ProtocolFailure>,
    pub stop: StopReason,
    /// The input-quantized trigger reads the true state rather than the
    /// transmitted one.
    pub trigger_uses_true_state: bool,
    pub omega: Option<f64>,
}

impl Trace {
    pub fn final_state(&self) -> Option<&Vector> {
        self.records.last().map(|r| &r.x_next)
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    /// Largest ∞-norm mismatch between each recorded successor and a fresh
    /// evaluation of the plant equation.
    pub fn replay_error(&self, sys: &PwaSystem) -> f64 {
        let mut worst = 0.0f64;
        for r in &self.records {
            let c = sys.cell(r.mode);
            let mut next = &c.a * &r.x + &c.b * &r.u + &c.f;
            if self.mode == SimMode::Disturbed {
                next += &c.d * &r.err;
            }
            worst = worst.max((next - &r.x_next).amax());
        }
        worst
    }
}

fn ensure_in_domain(sys: &PwaSystem, x: &Vector) -> Result<()> {
    if sys.total_space().contains(x, crate::model::TIE_TOL)? {
        Ok(())
    } else {
        Err(Error::OutOfDomain)
    }
}

fn advance_input(sys: &PwaSystem, ctrl: &AffineController, q: &UniformQuantizer, mu: f64, x: &Vector) -> Result<StepRecord> {
    let i = sys.mode_of(x)?;
    let c = sys.cell(i);
    let v = ctrl.input(i, x);
    let u = q.quantize_zoomed(mu, &v);
    let x_next = &c.a * x + &c.b * &u + &c.f;
    Ok(StepRecord {
        k: 0,
        x: x.clone(),
        mode: i,
        err: &u - &v,
        q: u.clone(),
        u,
        mu,
        zoom_event: false,
        requantized: false,
        saturation: q.saturates(mu, &v),
        x_next,
    })
}

/// One step of `x⁺ = A_ix + B_i q_μ(K_ix + g_i) + f_i`.
pub fn step_input_q(
    sys: &PwaSystem,
    ctrl: &AffineController,
    q: &UniformQuantizer,
    mu: f64,
    x: &Vector,
) -> Result<(Vector, StepRecord)> {
    let r = advance_input(sys, ctrl, q, mu, x)?;
    ensure_in_domain(sys, &r.x_next)?;
    Ok((r.x_next.clone(), r))
}

#[allow(clippy::too_many_arguments)]
fn advance_state(
    sys: &PwaSystem,
    ctrl: &AffineController,
    q: &UniformQuantizer,
    mu: f64,
    x: &Vector,
    requantize: bool,
    opts: &LpOptions,
) -> Result<StepRecord> {
    let i = sys.mode_of(x)?;
    let c = sys.cell(i);
    let sent = q.quantize_zoomed(mu, x);
    let (qv, requantized) = if requantize { requantize_value(sys, q, mu, i, &sent, opts)? } else { (sent, false) };
    let u = ctrl.input(i, &qv);
    let x_next = &c.a * x + &c.b * &u + &c.f;
    Ok(StepRecord {
        k: 0,
        x: x.clone(),
        mode: i,
        u,
        mu,
        err: &qv - x,
        q: qv,
        zoom_event: false,
        requantized,
        saturation: q.saturates(mu, x),
        x_next,
    })
}

/// One step of `x⁺ = A_ix + B_iK_i q_μ(x) + f_i + B_ig_i`. The mode is read
/// from the true state.
pub fn step_state_q(
    sys: &PwaSystem,
    ctrl: &AffineController,
    q: &UniformQuantizer,
    mu: f64,
    x: &Vector,
    requantize: bool,
    opts: &LpOptions,
) -> Result<(Vector, StepRecord)> {
    let r = advance_state(sys, ctrl, q, mu, x, requantize, opts)?;
    ensure_in_domain(sys, &r.x_next)?;
    Ok((r.x_next.clone(), r))
}

/// Controller-side correction: when the quantization box around `sent`
/// leaves `Cl(X_i)`, replace `sent` by the ∞-Chebyshev center of the part
/// of the box inside the cell. Returns the value and whether it changed.
pub fn requantize_value(
    sys: &PwaSystem,
    q: &UniformQuantizer,
    mu: f64,
    i: usize,
    sent: &Vector,
    opts: &LpOptions,
) -> Result<(Vector, bool)> {
    check_dim("transmitted value", sys.state_dim(), sent.len())?;
    let region = &sys.cell(i).region;
    let r = mu * q.delta;
    let inside = box_corners(sys.state_dim(), r).iter().all(|d| region.contains(&(sent + d), 0.0).unwrap_or(false));
    if inside {
        return Ok((sent.clone(), false));
    }
    let a = region.intersect(&HPolytope::box_around(sent, r))?;
    match a.chebyshev_center_inf(opts) {
        Ok((c, _)) => Ok((c, true)),
        Err(Error::Empty) | Err(Error::Unbounded) => Ok((sent.clone(), false)),
        Err(e) => Err(e),
    }
}

fn run_protocol(
    sys: &PwaSystem,
    ctrl: &AffineController,
    consts: &StabilityConstants,
    cfg: &SimConfig,
    opts: &LpOptions,
) -> Result<Trace> {
    check_dim("initial state", sys.state_dim(), cfg.x0.len())?;
    ensure_in_domain(sys, &cfg.x0)?;
    if !(cfg.mu0 > 0.0) {
        return Err(Error::InvalidArgument("initial zoom must be positive".into()));
    }
    let omega = zoom_rate(consts)?;
    let q = &consts.quantizer;
    let mode = consts.mode;
    let trigger = consts.trigger_radius();
    let mut mu = cfg.mu0;
    let mut x = cfg.x0.clone();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut since_event = 0usize;
    let mut stop = StopReason::MaxSteps;
    for k in 0..cfg.max_steps {
        // trigger test at the previous zoom level
        let fire = match mode {
            QuantizationMode::Input => euclid(&x) <= mu * trigger,
            QuantizationMode::State => euclid(&q.quantize_zoomed(mu, &x)) <= mu * trigger,
        };
        if fire {
            mu *= omega;
            since_event = 0;
        } else {
            since_event += 1;
            if consts.k0_bar.is_finite() && since_event as f64 > consts.k0_bar.max(0.0) + 1.0 {
                failures.push(ProtocolFailure::InterEventOverrun { k });
            }
        }
        let mut rec = match mode {
            QuantizationMode::Input => advance_input(sys, ctrl, q, mu, &x)?,
            QuantizationMode::State => advance_state(sys, ctrl, q, mu, &x, cfg.requantize, opts)?,
        };
        rec.k = k;
        rec.zoom_event = fire;
        if rec.saturation {
            failures.push(ProtocolFailure::Saturation { k });
        }
        let next = rec.x_next.clone();
        records.push(rec);
        if !sys.total_space().contains(&next, crate::model::TIE_TOL)? {
            failures.push(ProtocolFailure::DomainExit { k });
            stop = StopReason::DomainExit;
            break;
        }
        x = next;
        if euclid(&x) <= cfg.stop_radius {
            stop = StopReason::Converged;
            break;
        }
    }
    Ok(Trace {
        mode: match mode {
            QuantizationMode::Input => SimMode::InputQ,
            QuantizationMode::State => SimMode::StateQ,
        },
        records,
        failures,
        stop,
        trigger_uses_true_state: mode == QuantizationMode::Input,
        omega: Some(omega),
    })
}

/// Input-quantized loop with the true-state zoom trigger.
pub fn simulate_input_q(
    sys: &PwaSystem,
    ctrl: &AffineController,
    consts: &StabilityConstants,
    cfg: &SimConfig,
    opts: &LpOptions,
) -> Result<Trace> {
    if consts.mode != QuantizationMode::Input {
        return Err(Error::InvalidArgument("input-quantized run needs input-case constants".into()));
    }
    run_protocol(sys, ctrl, consts, cfg, opts)
}

/// State-quantized loop with the quantized-state zoom trigger.
pub fn simulate_state_q(
    sys: &PwaSystem,
    ctrl: &AffineController,
    consts: &StabilityConstants,
    cfg: &SimConfig,
    opts: &LpOptions,
) -> Result<Trace> {
    if consts.mode != QuantizationMode::State {
        return Err(Error::InvalidArgument("state-quantized run needs state-case constants".into()));
    }
    run_protocol(sys, ctrl, consts, cfg, opts)
}

struct DisturbanceGen {
    source: DisturbanceSource,
    rng: ChaCha8Rng,
    corners: Vec<Vector>,
    k: usize,
}

impl DisturbanceGen {
    fn new(source: &DisturbanceSource, dim: usize, delta: f64) -> Self {
        let seed = match source {
            DisturbanceSource::Uniform { seed } => *seed,
            _ => 0,
        };
        DisturbanceGen { source: source.clone(), rng: ChaCha8Rng::seed_from_u64(seed), corners: box_corners(dim, delta), k: 0 }
    }

    fn next(&mut self, dim: usize, delta: f64) -> Result<Vector> {
        let d = match &self.source {
            DisturbanceSource::Uniform { .. } => {
                Vector::from_fn(dim, |_, _| if delta > 0.0 { self.rng.random_range(-delta..=delta) } else { 0.0 })
            }
            DisturbanceSource::WorstCorner => self.corners[self.k % self.corners.len()].clone(),
            DisturbanceSource::Fixed(seq) => {
                if seq.is_empty() {
                    Vector::zeros(dim)
                } else {
                    let d = seq[self.k % seq.len()].clone();
                    check_dim("disturbance sample", dim, d.len())?;
                    if d.amax() > delta {
                        return Err(Error::InvalidArgument("disturbance sample exceeds the bound".into()));
                    }
                    d
                }
            }
        };
        self.k += 1;
        Ok(d)
    }
}

/// Unquantized affine feedback with additive `D_i d_k`, `|d_k|∞ ≤ Δ`.
pub fn simulate_disturbed(
    sys: &PwaSystem,
    ctrl: &AffineController,
    cfg: &SimConfig,
    delta: f64,
    source: &DisturbanceSource,
) -> Result<Trace> {
    check_dim("initial state", sys.state_dim(), cfg.x0.len())?;
    ensure_in_domain(sys, &cfg.x0)?;
    let nd = sys.disturbance_dim();
    let mut gen = DisturbanceGen::new(source, nd, delta);
    let mut x = cfg.x0.clone();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut stop = StopReason::MaxSteps;
    for k in 0..cfg.max_steps {
        let i = sys.mode_of(&x)?;
        let c = sys.cell(i);
        let u = ctrl.input(i, &x);
        let d = gen.next(nd, delta)?;
        let x_next = &c.a * &x + &c.b * &u + &c.f + &c.d * &d;
        records.push(StepRecord {
            k,
            x: x.clone(),
            mode: i,
            u,
            mu: 1.0,
            q: Vector::zeros(0),
            err: d,
            zoom_event: false,
            requantized: false,
            saturation: false,
            x_next: x_next.clone(),
        });
        if !sys.total_space().contains(&x_next, crate::model::TIE_TOL)? {
            failures.push(ProtocolFailure::DomainExit { k });
            stop = StopReason::DomainExit;
            break;
        }
        x = x_next;
        if euclid(&x) <= cfg.stop_radius {
            stop = StopReason::Converged;
            break;
        }
    }
    Ok(Trace { mode: SimMode::Disturbed, records, failures, stop, trigger_uses_true_state: false, omega: None })
}

/// Empty matrix helper for callers building systems without a channel.
pub fn no_channel(n: usize) -> Mat {
    Mat::zeros(n, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::certify::TuningParams;
    use crate::model::fixtures::{printed_gains, six_mode};
    use crate::model::Cell;
    use crate::polytope::HPolytope;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn opts() -> LpOptions {
        LpOptions::default()
    }

    fn fake_consts(mode: QuantizationMode, m: f64, radius: f64) -> StabilityConstants {
        let q = UniformQuantizer::new(0.01, 1.5).unwrap();
        let rn = 2f64.sqrt();
        StabilityConstants {
            mode,
            params: TuningParams::default(),
            alpha: 1.0,
            beta: 1.0,
            gamma: vec![1.0],
            pairs: vec![],
            m_i: vec![m],
            eps_i: vec![0.01],
            m,
            radius,
            m_tilde: (mode == QuantizationMode::State).then(|| m + rn * q.delta),
            m_bar: (mode == QuantizationMode::State).then(|| m + 2.0 * rn * q.delta),
            k0_bar: f64::INFINITY,
            quantizer: q,
        }
    }

    #[test]
    fn grid_aligned_input_is_exact() {
        let sys = six_mode();
        let q = UniformQuantizer::new(0.01, 1.5).unwrap();
        let ctrl = AffineController::linear(vec![Mat::zeros(1, 2); 6]);
        let x = dvector![-0.5, 0.2];
        let (xn, r) = step_input_q(&sys, &ctrl, &q, 1.0, &x).unwrap();
        assert_eq!(r.u, dvector![0.0]);
        assert_eq!(xn, &sys.cell(0).a * &x);
    }

    #[test]
    fn input_step_replays() {
        let sys = six_mode();
        let q = UniformQuantizer::new(0.01, 1.5).unwrap();
        let ctrl = printed_gains();
        let x = dvector![-0.5, 0.2];
        let (xn, r) = step_input_q(&sys, &ctrl, &q, 1.0, &x).unwrap();
        let c = sys.cell(0);
        assert!((xn - (&c.a * &x + &c.b * &r.u + &c.f)).amax() <= 1e-12);
        let (xn2, _) = step_input_q(&sys, &ctrl, &q, 1.0, &x).unwrap();
        assert_eq!(step_input_q(&sys, &ctrl, &q, 1.0, &x).unwrap().0, xn2);
    }

    #[test]
    fn state_step_from_corner_stays_in_domain() {
        let sys = six_mode();
        let q = UniformQuantizer::new(0.01, 1.5).unwrap();
        let (xn, r) = step_state_q(&sys, &printed_gains(), &q, 1.0, &dvector![1.0, 1.0], false, &opts()).unwrap();
        assert!(sys.total_space().contains(&xn, 1e-12).unwrap());
        let c = sys.cell(r.mode);
        assert!((xn - (&c.a * &r.x + &c.b * &r.u + &c.f)).amax() <= 1e-12);
    }

    #[test]
    fn requantization_on_a_straddling_box() {
        let sys = six_mode();
        let q = UniformQuantizer::new(0.01, 1.5).unwrap();
        // X₁ is x₁ ≤ −0.3 (left of X₅); center the box on the face
        let sent = dvector![-0.30, 0.0];
        let x = dvector![-0.305, 0.0];
        let (qn, changed) = requantize_value(&sys, &q, 1.0, 0, &sent, &opts()).unwrap();
        assert!(changed);
        assert!((&qn - &x).amax() <= 0.01 + 1e-12);
        // the retained half box is [−0.31, −0.30] × [−0.01, 0.01]
        assert_relative_eq!(qn, dvector![-0.305, 0.0], epsilon = 1e-9);
        let inner = dvector![-0.6, 0.0];
        assert_eq!(requantize_value(&sys, &q, 1.0, 0, &inner, &opts()).unwrap(), (inner, false));
    }

    #[test]
    fn three_events_on_a_contraction() {
        let sq = HPolytope::hypercube(2, 1.0);
        let cell = Cell { region: sq.clone(), a: crate::linalg::eye(2) * 0.1, b: Mat::zeros(2, 1), f: Vector::zeros(2), d: Mat::zeros(2, 0) };
        let sys = PwaSystem::new(2, 1, 0, sq, vec![cell]).unwrap();
        let ctrl = AffineController::linear(vec![Mat::zeros(1, 2)]);
        let consts = fake_consts(QuantizationMode::Input, 1.0, 2.0); // Ω = 0.5
        let mut cfg = SimConfig::new(dvector![0.5, 0.5]);
        cfg.max_steps = 3;
        cfg.stop_radius = 0.0;
        let t = simulate_input_q(&sys, &ctrl, &consts, &cfg, &opts()).unwrap();
        let events = t.records.iter().filter(|r| r.zoom_event).count();
        assert_eq!(events, 3);
        assert_relative_eq!(t.records[2].mu, 0.125);
    }

    #[test]
    fn origin_start_fires_immediately() {
        let sys = six_mode();
        let consts = fake_consts(QuantizationMode::Input, 0.1, 1.0);
        let mut cfg = SimConfig::new(dvector![0.0, 0.0]);
        cfg.max_steps = 5;
        let t = simulate_input_q(&sys, &printed_gains(), &consts, &cfg, &opts()).unwrap();
        assert!(t.records[0].zoom_event);
        assert_eq!(t.final_state().unwrap(), &dvector![0.0, 0.0]);
    }

    #[test]
    fn disturbed_run_is_reproducible() {
        let sq = HPolytope::hypercube(2, 1.0);
        let cell = Cell { region: sq.clone(), a: crate::linalg::eye(2) * 0.5, b: Mat::zeros(2, 1), f: Vector::zeros(2), d: crate::linalg::eye(2) };
        let sys = PwaSystem::new(2, 1, 2, sq, vec![cell]).unwrap();
        let ctrl = AffineController::linear(vec![Mat::zeros(1, 2)]);
        let mut cfg = SimConfig::new(dvector![0.9, -0.4]);
        cfg.max_steps = 50;
        let src = DisturbanceSource::Uniform { seed: 11 };
        let a = simulate_disturbed(&sys, &ctrl, &cfg, 0.05, &src).unwrap();
        let b = simulate_disturbed(&sys, &ctrl, &cfg, 0.05, &src).unwrap();
        assert_eq!(a, b);
        assert!(a.replay_error(&sys) <= 1e-12);
        assert!(a.records.iter().all(|r| r.err.amax() <= 0.05));
        let nominal = simulate_disturbed(&sys, &ctrl, &cfg, 0.0, &src).unwrap();
        assert!(nominal.records.iter().all(|r| r.x_next == &r.x * 0.5));
    }

    #[test]
    fn state_trigger_matches_definition() {
        let sys = six_mode();
        let consts = fake_consts(QuantizationMode::State, 0.05, 1.5);
        let mut cfg = SimConfig::new(dvector![0.2, 0.3]);
        cfg.max_steps = 60;
        let t = simulate_state_q(&sys, &printed_gains(), &consts, &cfg, &opts()).unwrap();
        let q = &consts.quantizer;
        let mut mu_prev = 1.0;
        for r in &t.records {
            let fire = euclid(&q.quantize_zoomed(mu_prev, &r.x)) <= mu_prev * consts.trigger_radius();
            assert_eq!(fire, r.zoom_event, "step {}", r.k);
            mu_prev = r.mu;
        }
        assert!(t.replay_error(&sys) <= 1e-12);
    }
}
