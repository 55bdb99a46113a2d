//! Coupled node/channel fixed point.
//!
//! The node side maps `(tau, a)` to the probability that a node starts a CCA
//! in a mini-slot; the channel side maps `tau` to the probability `a` that a
//! CCA finds the channel busy. The solver finds the `tau` where both agree.

use crate::error::{Error, Result};
use crate::metrics;
use crate::network::{derived_probs, NetworkConfig, TrafficMode};
use crate::queueing;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Convergence threshold on the fixed-point residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relaxation factor in `(0, 1]`.
    pub damping: f64,
    pub initial_tau: f64,
    pub initial_a: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_iterations: 100_000, damping: 0.5, initial_tau: 1e-4, initial_a: 0.0 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("solver tolerance must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config("damping must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_tau) || !(0.0..=1.0).contains(&self.initial_a) {
            return Err(Error::Config("initial point must be a pair of probabilities".into()));
        }
        Ok(())
    }
}

/// How the solver reached its answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DampedIteration,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub tau: f64,
    pub a: f64,
    /// Queue utilisation, `M > 1` model only.
    pub p: Option<f64>,
    /// Empty-buffer probability, `M > 1` model only.
    pub p0: Option<f64>,
    /// Mean service time consistent with `(tau, a)`, `M > 1` model only.
    pub tvs: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub method: SolveMethod,
}

/// The bracketed service-time polynomial shared by all three node models.
fn node_bracket(a: f64, k26: f64, two_l: f64) -> f64 {
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    let a5 = a4 * a;
    two_l + 144.0 + 158.0 * a + 318.0 * (a2 + a3 + a4) - 12.0 * k26 - (two_l + 66.0 - 12.0 * k26) * a5
}

/// Right-hand side of the node model: the CCA-start probability implied by
/// `(tau_prev, a)`. `p0` is the empty-buffer probability and is required for
/// [`TrafficMode::UnsatM`].
pub fn tau_update(tau_prev: f64, a: f64, cfg: &NetworkConfig, p0: Option<f64>) -> Result<f64> {
    let e = derived_probs(tau_prev, a, cfg.nodes.max(1), cfg.frame_bytes, cfg.rate.max(0.0))?;
    let two_l = f64::from(cfg.frame_symbols());
    // idle-time term: 1/p for unsat1, p0 * 2L / r for unsatm, none when saturated
    let idle = match cfg.mode {
        TrafficMode::Saturated => 0.0,
        TrafficMode::Unsat1 | TrafficMode::UnsatM if cfg.rate <= 0.0 => return Ok(0.0),
        TrafficMode::Unsat1 => two_l / cfg.rate,
        TrafficMode::UnsatM => {
            let p0 = p0.ok_or_else(|| Error::Domain("the M > 1 model needs p0".into()))?;
            if !(0.0..=1.0).contains(&p0) {
                return Err(Error::Domain(format!("p0 = {p0} is not a probability")));
            }
            p0 * two_l / cfg.rate
        }
    };
    let d = e.d;
    let retries = 1.0 + d + d * d + d * d * d;
    let stages = 1.0 + a + a * a + a.powi(3) + a.powi(4);
    let denom = node_bracket(a, e.k.powi(26), two_l) * retries + idle;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Domain(format!("node-model denominator {denom} is not positive")));
    }
    Ok((retries * stages / denom).clamp(0.0, 1.0))
}

/// Channel-model time normaliser divided by `theta`; also the denominator
/// shared by the busy probability and the throughput.
pub fn channel_denominator(tau: f64, nodes: u32, frame_bytes: u32) -> Result<f64> {
    let e = derived_probs(tau, 0.0, nodes, frame_bytes, 0.0)?;
    let two_l = f64::from(2 * frame_bytes);
    let (x, y, z) = (e.x, e.y, e.z);
    let z12 = z.powi(12);
    let z25 = z.powi(25);
    let geometric: f64 = (0..25).map(|i| z.powi(i)).sum();
    Ok(two_l + 80.0 - (two_l + 79.0) * x + y * geometric + (two_l + 7.0) * y * z12 - (two_l + 50.0) * y * z25)
}

/// Probability that a CCA finds the channel busy given `tau`.
pub fn a_from_tau(tau: f64, nodes: u32, frame_bytes: u32) -> Result<f64> {
    if nodes < 2 {
        return Err(Error::Domain("the channel model needs at least 2 nodes".into()));
    }
    let e = derived_probs(tau, 0.0, nodes, frame_bytes, 0.0)?;
    let idle = 12.0 * (1.0 - e.x) + 1.0;
    let den = channel_denominator(tau, nodes, frame_bytes)?;
    Ok((1.0 - idle / den).clamp(0.0, 1.0))
}

/// Normalised throughput: fraction of channel time carrying acknowledged
/// payload.
pub fn throughput(tau: f64, nodes: u32, frame_bytes: u32) -> Result<f64> {
    if tau == 0.0 {
        return Ok(0.0);
    }
    let e = derived_probs(tau, 0.0, nodes, frame_bytes, 0.0)?;
    let den = channel_denominator(tau, nodes, frame_bytes)?;
    Ok((f64::from(2 * frame_bytes) * e.y * e.z.powi(25) / den).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelStateKind {
    /// First 19 symbols after a node starts its backoff.
    Idle1,
    /// Last idle symbol before a transmission may start.
    Idle2,
    /// `i`-th symbol of the 12-symbol data collision window.
    Cw(u8),
    TxSuc,
    /// Gap between data end and ACK start.
    Idle3,
    /// `i`-th symbol of the 12-symbol ACK collision window.
    Iw(u8),
    AckSuc,
    TxFail,
    AckFail,
    /// ACK timeout after a failed transmission.
    Wack,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    pub kind: ChannelStateKind,
    /// Stationary probability divided by `pi(IDLE2)`.
    pub relative: f64,
    pub duration: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStationaryDistribution {
    pub states: Vec<ChannelState>,
    /// `pi(IDLE2)` after normalising the probabilities to sum to one.
    pub theta: f64,
    /// Duration-weighted mass `T`, in the same normalisation as `theta`.
    pub total_t: f64,
}

impl ChannelStationaryDistribution {
    pub fn probability(&self, kind: ChannelStateKind) -> Option<f64> {
        self.states.iter().find(|s| s.kind == kind).map(|s| s.relative * self.theta)
    }

    pub fn relative(&self, kind: ChannelStateKind) -> Option<f64> {
        self.states.iter().find(|s| s.kind == kind).map(|s| s.relative)
    }

    /// Duration-weighted sum of the relative probabilities.
    pub fn weighted_relative_sum(&self) -> f64 {
        self.states.iter().map(|s| s.relative * f64::from(s.duration)).sum()
    }

    /// Fraction of channel time spent in `kind`.
    pub fn time_share(&self, kind: ChannelStateKind) -> Option<f64> {
        self.states
            .iter()
            .find(|s| s.kind == kind)
            .map(|s| s.relative * self.theta * f64::from(s.duration) / self.total_t)
    }
}

pub fn channel_stationary(tau: f64, nodes: u32, frame_bytes: u32) -> Result<ChannelStationaryDistribution> {
    if tau == 0.0 {
        return Err(Error::Degenerate("channel distribution is undefined at tau = 0".into()));
    }
    if nodes < 2 {
        return Err(Error::Domain("the channel model needs at least 2 nodes".into()));
    }
    let e = derived_probs(tau, 0.0, nodes, frame_bytes, 0.0)?;
    let (x, y, z) = (e.x, e.y, e.z);
    let two_l = 2 * frame_bytes;
    let yz12 = y * z.powi(12);
    let yz25 = y * z.powi(25);

    let mut states = Vec::with_capacity(32);
    let mut push = |kind, relative, duration| states.push(ChannelState { kind, relative, duration });
    push(ChannelStateKind::Idle1, 1.0 - x, 19);
    push(ChannelStateKind::Idle2, 1.0, 1);
    for i in 1..=12u8 {
        push(ChannelStateKind::Cw(i), y * z.powi(i as i32 - 1), 1);
    }
    push(ChannelStateKind::TxSuc, yz12, two_l - 12);
    push(ChannelStateKind::Idle3, yz12, 20);
    for i in 1..=12u8 {
        push(ChannelStateKind::Iw(i), y * z.powi(12 + i as i32), 1);
    }
    push(ChannelStateKind::AckSuc, yz25, 10);
    push(ChannelStateKind::TxFail, 1.0 - x - yz12, two_l + 6);
    push(ChannelStateKind::AckFail, (1.0 - z.powi(13)) * yz12, two_l + 6);
    push(ChannelStateKind::Wack, 1.0 - x - yz25, 54);

    let mass: f64 = states.iter().map(|s| s.relative).sum();
    let theta = 1.0 / mass;
    let total_t = theta * channel_denominator(tau, nodes, frame_bytes)?;
    Ok(ChannelStationaryDistribution { states, theta, total_t })
}

/// Auxiliary queue quantities for the `M > 1` model at a given `tau`.
struct QueueCoupling {
    a: f64,
    tvs: f64,
    p: f64,
    p0: f64,
}

fn queue_coupling(tau: f64, cfg: &NetworkConfig) -> Result<QueueCoupling> {
    let a = a_from_tau(tau, cfg.nodes, cfg.frame_bytes)?;
    let summary = metrics::service_summary(tau, a, cfg.nodes, cfg.frame_bytes)?;
    let tvs = summary.delays.tvs;
    let p = queueing::utilization(cfg.rate, cfg.frame_bytes, tvs);
    let p0 = queueing::empty_prob(p, cfg.buffer);
    Ok(QueueCoupling { a, tvs, p, p0 })
}

/// Everything the node model needs at `tau`, with the channel side and
/// (for `M > 1`) the queue side evaluated consistently.
struct Evaluation {
    a: f64,
    rhs: f64,
    queue: Option<QueueCoupling>,
}

fn evaluate(tau: f64, cfg: &NetworkConfig) -> Result<Evaluation> {
    match cfg.mode {
        TrafficMode::UnsatM => {
            let q = queue_coupling(tau, cfg)?;
            let rhs = tau_update(tau, q.a, cfg, Some(q.p0))?;
            Ok(Evaluation { a: q.a, rhs, queue: Some(q) })
        }
        _ => {
            let a = a_from_tau(tau, cfg.nodes, cfg.frame_bytes)?;
            let rhs = tau_update(tau, a, cfg, Some(1.0))?;
            Ok(Evaluation { a, rhs, queue: None })
        }
    }
}

fn finish(tau: f64, ev: Evaluation, iterations: usize, tol: f64, method: SolveMethod) -> FixedPoint {
    let residual = (ev.rhs - tau).abs();
    let (p, p0, tvs) = match ev.queue {
        Some(q) => (Some(q.p), Some(q.p0), Some(q.tvs)),
        None => (None, None, None),
    };
    FixedPoint { tau, a: ev.a, p, p0, tvs, iterations, residual, converged: residual <= tol, method }
}

/// Steps of consistent Δτ sign alternation treated as oscillation.
const OSCILLATION_WINDOW: usize = 50;

/// Extra damped steps allowed after the tolerance is met.
const POLISH_LIMIT: usize = 2000;

/// Keep iterating past the tolerance until the residual stops shrinking, so
/// the returned root does not depend on the damping or the starting point.
fn polish(tau: f64, ev: Evaluation, damping: f64, cfg: &NetworkConfig) -> Result<(f64, Evaluation, usize)> {
    let mut best = (tau, (ev.rhs - tau).abs(), ev);
    let (mut cur_tau, mut cur_rhs) = (tau, best.2.rhs);
    let mut stalls = 0;
    let mut steps = 0;
    while steps < POLISH_LIMIT && best.1 > 0.0 && stalls < 3 {
        steps += 1;
        cur_tau = ((1.0 - damping) * cur_tau + damping * cur_rhs).clamp(0.0, 1.0);
        let ev = evaluate(cur_tau, cfg)?;
        cur_rhs = ev.rhs;
        let r = (ev.rhs - cur_tau).abs();
        if r < best.1 {
            best = (cur_tau, r, ev);
            stalls = 0;
        } else {
            stalls += 1;
        }
    }
    Ok((best.0, best.2, steps))
}

/// Solve the coupled fixed point by damped iteration, falling back to
/// bisection when the iterate keeps oscillating.
pub fn solve(cfg: &NetworkConfig, settings: &SolverSettings) -> Result<FixedPoint> {
    cfg.validate_analytical()?;
    settings.validate()?;
    let at_zero = evaluate(0.0, cfg)?;
    if at_zero.rhs == 0.0 {
        // no offered load: nodes never sense the channel
        return Ok(finish(0.0, at_zero, 0, settings.tolerance, SolveMethod::DampedIteration));
    }
    let mut tau = settings.initial_tau;
    let mut alternations = 0usize;
    let mut last_step = 0.0f64;
    for iteration in 0..settings.max_iterations {
        let ev = evaluate(tau, cfg).map_err(|e| Error::Divergence(e.to_string()))?;
        let residual = (ev.rhs - tau).abs();
        if residual <= settings.tolerance {
            let (tau, ev, extra) = polish(tau, ev, settings.damping, cfg)?;
            return Ok(finish(tau, ev, iteration + extra, settings.tolerance, SolveMethod::DampedIteration));
        }
        let next = ((1.0 - settings.damping) * tau + settings.damping * ev.rhs).clamp(0.0, 1.0);
        if !next.is_finite() {
            return Err(Error::Divergence(format!("iterate became {next}")));
        }
        let step = next - tau;
        if step * last_step < 0.0 {
            alternations += 1;
            if alternations >= OSCILLATION_WINDOW {
                log::debug!("damped iteration oscillates for {cfg:?}; switching to bisection");
                let mut fp = solve_bisection(cfg, settings)?;
                fp.iterations += iteration;
                return Ok(fp);
            }
        } else {
            alternations = 0;
        }
        last_step = step;
        tau = next;
    }
    let ev = evaluate(tau, cfg)?;
    Err(Error::NonConvergence { iterations: settings.max_iterations, residual: (ev.rhs - tau).abs() })
}

/// Bisection on the composed residual `tau_update(tau, a(tau)) - tau`,
/// which is non-negative at 0 and non-positive at 1.
pub fn solve_bisection(cfg: &NetworkConfig, settings: &SolverSettings) -> Result<FixedPoint> {
    cfg.validate_analytical()?;
    settings.validate()?;
    let residual_at = |tau: f64| -> Result<(f64, Evaluation)> {
        let ev = evaluate(tau, cfg).map_err(|e| Error::Divergence(e.to_string()))?;
        Ok((ev.rhs - tau, ev))
    };
    let (r_lo, ev_lo) = residual_at(0.0)?;
    if r_lo.abs() <= settings.tolerance {
        return Ok(finish(0.0, ev_lo, 0, settings.tolerance, SolveMethod::Bisection));
    }
    // Bisect down to adjacent floats and keep the smallest residual seen.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best: Option<(f64, f64, Evaluation)> = None;
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || iterations >= settings.max_iterations {
            break;
        }
        iterations += 1;
        let (r, ev) = residual_at(mid)?;
        if best.as_ref().is_none_or(|b| r.abs() < b.1) {
            best = Some((mid, r.abs(), ev));
        }
        if r == 0.0 {
            break;
        }
        if r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (tau, _, ev) = best.ok_or_else(|| Error::NonConvergence { iterations, residual: r_lo.abs() })?;
    let fp = finish(tau, ev, iterations, settings.tolerance, SolveMethod::Bisection);
    if !fp.converged {
        return Err(Error::NonConvergence { iterations, residual: fp.residual });
    }
    Ok(fp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn tau_update_without_traffic() {
        let cfg = NetworkConfig::unsat1(10, 100, 0.0);
        assert_eq!(tau_update(0.01, 0.3, &cfg, None).unwrap(), 0.0);
    }

    #[test]
    fn tau_update_saturated_idle_network() {
        // a = 0, k = 1: one CCA per 332-symbol service cycle
        let cfg = NetworkConfig::saturated(10, 100);
        assert_relative_eq!(tau_update(0.0, 0.0, &cfg, None).unwrap(), 1.0 / 332.0, max_relative = 1e-15);
    }

    #[test]
    fn tau_update_unsat1_always_busy() {
        // a = 1: five CCAs per 1190-symbol access failure plus the idle gap 2L/r
        let cfg = NetworkConfig::unsat1(10, 100, 0.05);
        let v = tau_update(0.0, 1.0, &cfg, None).unwrap();
        assert_relative_eq!(v, 5.0 / 5190.0, max_relative = 1e-15);
        assert_relative_eq!(v, 0.000_963_391_136_801_541_425_82, max_relative = 1e-14);
    }

    #[test]
    fn tau_update_unsatm_needs_p0() {
        let cfg = NetworkConfig::unsat_m(10, 100, 0.05, 4);
        assert!(tau_update(0.001, 0.2, &cfg, None).is_err());
        assert!(tau_update(0.001, 0.2, &cfg, Some(0.5)).is_ok());
        // p0 = 1 makes the idle term match the single-frame buffer
        let one = NetworkConfig::unsat1(10, 100, 0.05);
        assert_eq!(tau_update(0.001, 0.2, &cfg, Some(1.0)).unwrap(), tau_update(0.001, 0.2, &one, None).unwrap());
    }

    #[test]
    fn busy_probability_golden() {
        assert_eq!(a_from_tau(0.0, 10, 100).unwrap(), 0.0);
        assert_relative_eq!(a_from_tau(0.01, 10, 100).unwrap(), 0.934_189_941_693_330_176_51, max_relative = 1e-13);
        assert_relative_eq!(a_from_tau(0.5, 2, 30).unwrap(), 0.905_889_595_715_098_121_37, max_relative = 1e-13);
    }

    #[test]
    fn throughput_golden() {
        assert_eq!(throughput(0.0, 10, 100).unwrap(), 0.0);
        assert_eq!(throughput(1.0, 2, 100).unwrap(), 0.0);
        assert_eq!(throughput(1.0, 7, 50).unwrap(), 0.0);
        assert_relative_eq!(throughput(0.003, 10, 100).unwrap(), 0.284_193_679_956_379_730_74, max_relative = 1e-13);
    }

    #[test]
    fn channel_distribution_identities() {
        let d = channel_stationary(0.1, 2, 50).unwrap();
        let wack = d.relative(ChannelStateKind::Wack).unwrap();
        let fail = d.relative(ChannelStateKind::TxFail).unwrap() + d.relative(ChannelStateKind::AckFail).unwrap();
        assert!((wack - fail).abs() <= 1e-15);
        let idle1 = d.relative(ChannelStateKind::Idle1).unwrap();
        assert!((idle1 - wack - d.relative(ChannelStateKind::AckSuc).unwrap()).abs() <= 1e-15);
        let total: f64 = d.states.iter().map(|s| s.relative * d.theta).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let shares: f64 = d.states.iter().map(|s| d.time_share(s.kind).unwrap()).sum();
        assert!((shares - 1.0).abs() < 1e-14);
    }

    #[test]
    fn channel_distribution_weighted_sum() {
        let d = channel_stationary(0.05, 5, 100).unwrap();
        let closed = channel_denominator(0.05, 5, 100).unwrap();
        assert!((d.weighted_relative_sum() - closed).abs() <= 1e-12 * closed);
    }

    #[test]
    fn channel_distribution_vanishing_traffic() {
        let d = channel_stationary(1e-12, 10, 100).unwrap();
        assert!(d.relative(ChannelStateKind::AckSuc).unwrap() < 1e-10);
        assert!(matches!(channel_stationary(0.0, 10, 100), Err(Error::Degenerate(_))));
    }

    #[test]
    fn solve_no_traffic() {
        let fp = solve(&NetworkConfig::unsat1(10, 100, 0.0), &SolverSettings::default()).unwrap();
        assert_eq!((fp.tau, fp.a), (0.0, 0.0));
        assert!(fp.converged);
    }

    #[test]
    fn solve_saturated_golden() {
        let fp = solve(&NetworkConfig::saturated(10, 50), &SolverSettings::default()).unwrap();
        assert!(fp.converged);
        assert_relative_eq!(fp.tau, 0.004_151_648_248_583_051_505_4, max_relative = 1e-9);
        assert_relative_eq!(fp.a, 0.840_466_224_013_735_818_93, max_relative = 1e-9);
    }

    #[test]
    fn solve_unsat1_golden() {
        let cfg = NetworkConfig::unsat1(10, 100, 0.05);
        let fp = solve(&cfg, &SolverSettings::default()).unwrap();
        // a residual of 1e-12 leaves the iterate within a few 1e-12 of the root
        assert_abs_diff_eq!(fp.tau, 0.000_517_064_355_202_130_224_85, epsilon = 1e-11);
        assert_relative_eq!(fp.a, 0.561_769_968_754_671_159_59, max_relative = 1e-8);
        assert_relative_eq!(throughput(fp.tau, 10, 100).unwrap(), 0.378_121_568_975_800_465_6, max_relative = 1e-8);
    }

    #[test]
    fn solve_unsatm_golden() {
        let cfg = NetworkConfig::unsat_m(10, 100, 0.05, 5);
        let fp = solve(&cfg, &SolverSettings::default()).unwrap();
        assert_relative_eq!(fp.tau, 0.000_725_980_491_274_626_31, max_relative = 1e-8);
        assert_relative_eq!(fp.a, 0.641_880_904_186_288_434_57, max_relative = 1e-8);
        assert_relative_eq!(fp.tvs.unwrap(), 805.660_774_717_932_479_69, max_relative = 1e-8);
        let q = queueing::utilization(0.05, 100, fp.tvs.unwrap());
        assert_eq!(fp.p, Some(q));
        assert_eq!(fp.p0, Some(queueing::empty_prob(q, 5)));
    }

    #[test]
    fn solver_residuals_hold_at_solution() {
        let settings = SolverSettings::default();
        for cfg in [
            NetworkConfig::unsat1(5, 50, 0.02),
            NetworkConfig::unsat_m(20, 30, 0.1, 10),
            NetworkConfig::saturated(2, 127),
        ] {
            let fp = solve(&cfg, &settings).unwrap();
            let rhs = tau_update(fp.tau, fp.a, &cfg, fp.p0.or(Some(1.0))).unwrap();
            assert!((rhs - fp.tau).abs() <= settings.tolerance);
            assert!((fp.a - a_from_tau(fp.tau, cfg.nodes, cfg.frame_bytes).unwrap()).abs() <= settings.tolerance);
        }
    }

    #[test]
    fn bisection_agrees_with_iteration() {
        let settings = SolverSettings::default();
        let cfg = NetworkConfig::unsat1(5, 100, 0.08);
        let it = solve(&cfg, &settings).unwrap();
        let bi = solve_bisection(&cfg, &settings).unwrap();
        assert_eq!(bi.method, SolveMethod::Bisection);
        assert!((it.tau - bi.tau).abs() < 1e-9);
    }

    #[test]
    fn rejects_single_node_and_bad_settings() {
        assert!(solve(&NetworkConfig::unsat1(1, 100, 0.05), &SolverSettings::default()).is_err());
        let bad = SolverSettings { damping: 0.0, ..SolverSettings::default() };
        assert!(solve(&NetworkConfig::unsat1(5, 100, 0.05), &bad).is_err());
    }

    proptest! {
        #[test]
        fn throughput_in_unit_interval(tau in 0.0f64..=1.0, n in 2u32..60, l in 1u32..200) {
            let th = throughput(tau, n, l).unwrap();
            prop_assert!((0.0..=1.0).contains(&th));
        }

        #[test]
        fn busy_probability_in_unit_interval(tau in 0.0f64..=1.0, n in 2u32..60, l in 1u32..200) {
            let a = a_from_tau(tau, n, l).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
