//! Per-frame service metrics derived from a converged `(tau, a)` pair:
//! service times of the three service outcomes, per-attempt and per-retry
//! outcome probabilities, reliability and mean service delays.

use crate::analytical::{self, FixedPoint};
use crate::error::{Error, Result};
use crate::network::{derived_probs, NetworkConfig, PerformanceReport, ProtocolConstants, Source, TrafficMode};
use crate::queueing;

/// Mean duration of one service outcome, in symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceTimes {
    /// Frame discarded after macMaxCSMABackoffs CCA failures.
    pub t1: f64,
    /// Frame sent and acknowledged in one attempt.
    pub t2: f64,
    /// Frame sent and collided (with data or an ACK) in one attempt.
    pub t3: f64,
}

/// `T2` and `T3` are closed-form polynomials in `a` over `1 - a^5`.
/// `T2` equals the stage-by-stage expectation; `T3` is kept as published,
/// which adds `12 (a + a^2 + a^3 + a^4)` to the stage-by-stage value.
const T2_POLY: [f64; 6] = [132.0, 158.0, 318.0, 318.0, 318.0, -1244.0];
const T3_POLY: [f64; 6] = [144.0, 170.0, 330.0, 330.0, 330.0, -1256.0];

fn poly(coeffs: &[f64; 6], a: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * a + c)
}

pub fn service_times(a: f64, k: f64, frame_bytes: u32) -> Result<ServiceTimes> {
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Domain(format!("service times need a in [0, 1), got {a}")));
    }
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::Domain(format!("k = {k} is not a probability")));
    }
    let denom = 1.0 - a.powi(5);
    let frame = f64::from(2 * frame_bytes) * denom;
    Ok(ServiceTimes {
        t1: f64::from(ProtocolConstants::default().access_failure_time()),
        t2: (poly(&T2_POLY, a) + frame) / denom,
        t3: (poly(&T3_POLY, a) + frame) / denom,
    })
}

/// Outcome probabilities of a single transmission attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttemptProbs {
    pub p_suc: f64,
    pub p_acc: f64,
    pub p_coll: f64,
}

pub fn attempt_probs(a: f64, k: f64) -> Result<AttemptProbs> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&k) {
        return Err(Error::Domain(format!("attempt probabilities need a, k in [0, 1], got ({a}, {k})")));
    }
    let a5 = a.powi(5);
    let k26 = k.powi(26);
    // The common factor tau of the three unnormalised terms cancels.
    Ok(AttemptProbs { p_suc: (1.0 - a5) * k26, p_acc: a5, p_coll: (1.0 - a5) * (1.0 - k26) })
}

pub const RETRY_STAGES: usize = 4;

/// Outcome weights per value `i` of the retransmission counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryProbs {
    /// Delivered with retry counter `i`.
    pub ps: [f64; RETRY_STAGES],
    /// Discarded by CCA failure with retry counter `i`.
    pub pc: [f64; RETRY_STAGES],
    /// Collided with retry counter `i`; `pf[3]` is the retry-limit drop.
    pub pf: [f64; RETRY_STAGES],
}

impl RetryProbs {
    pub fn ps_sum(&self) -> f64 {
        self.ps.iter().sum()
    }

    pub fn pc_sum(&self) -> f64 {
        self.pc.iter().sum()
    }

    /// Normaliser shared by reliability and the mean service delay.
    pub fn total(&self) -> f64 {
        self.ps_sum() + self.pc_sum() + self.pf[RETRY_STAGES - 1]
    }
}

pub fn retry_probs(ap: &AttemptProbs) -> RetryProbs {
    let c = ap.p_coll;
    // First-attempt weight keeps the printed minus signs so that the stage
    // weights telescope: sum(ps) == p_suc, sum(pc) == p_acc.
    let head = 1.0 - c - c * c - c * c * c;
    let mut rp = RetryProbs {
        ps: [head * ap.p_suc, 0.0, 0.0, 0.0],
        pc: [head * ap.p_acc, 0.0, 0.0, 0.0],
        pf: [c, 0.0, 0.0, 0.0],
    };
    for i in 1..RETRY_STAGES {
        let ci = c.powi(i as i32);
        rp.ps[i] = ci * ap.p_suc;
        rp.pc[i] = ci * ap.p_acc;
        rp.pf[i] = ci * c;
    }
    rp
}

pub fn reliability(rp: &RetryProbs) -> Result<f64> {
    let total = rp.total();
    if total == 0.0 {
        return Err(Error::Degenerate("reliability normaliser is zero".into()));
    }
    Ok(rp.ps_sum() / total)
}

/// Mean service delays in symbols, excluding queueing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delays {
    /// Mean delay of delivered frames; `None` when nothing is ever delivered.
    pub ts: Option<f64>,
    /// Mean delay over every serviced frame, whatever its fate.
    pub tvs: f64,
}

pub fn delays(rp: &RetryProbs, st: &ServiceTimes) -> Result<Delays> {
    let success: f64 = (0..RETRY_STAGES).map(|i| rp.ps[i] * (i as f64 * st.t3 + st.t2)).sum();
    let access: f64 = (0..RETRY_STAGES).map(|i| rp.pc[i] * (i as f64 * st.t3 + st.t1)).sum();
    let dropped = 4.0 * rp.pf[RETRY_STAGES - 1] * st.t3;
    let total = rp.total();
    if total == 0.0 {
        return Err(Error::Degenerate("delay normaliser is zero".into()));
    }
    let ps_sum = rp.ps_sum();
    Ok(Delays { ts: (ps_sum > 0.0).then(|| success / ps_sum), tvs: (success + access + dropped) / total })
}

/// Adds the mean queueing wait to both delays.
pub fn queue_adjusted(ts: f64, tvs: f64, wq: f64) -> (f64, f64) {
    (ts + wq, tvs + wq)
}

/// Everything needed to derive delays from `(tau, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceSummary {
    pub times: ServiceTimes,
    pub attempt: AttemptProbs,
    pub retry: RetryProbs,
    pub ps: f64,
    pub delays: Delays,
}

pub fn service_summary(tau: f64, a: f64, nodes: u32, frame_bytes: u32) -> Result<ServiceSummary> {
    let e = derived_probs(tau, a, nodes, frame_bytes, 0.0)?;
    let times = service_times(a, e.k, frame_bytes)?;
    let attempt = attempt_probs(a, e.k)?;
    let retry = retry_probs(&attempt);
    let ps = reliability(&retry)?;
    let delays = delays(&retry, &times)?;
    Ok(ServiceSummary { times, attempt, retry, ps, delays })
}

/// Assemble the full analytical report for a converged fixed point.
pub fn report(cfg: &NetworkConfig, fp: &FixedPoint) -> Result<PerformanceReport> {
    if !fp.converged {
        return Err(Error::NonConvergence { iterations: fp.iterations, residual: fp.residual });
    }
    let summary = service_summary(fp.tau, fp.a, cfg.nodes, cfg.frame_bytes)?;
    let th = analytical::throughput(fp.tau, cfg.nodes, cfg.frame_bytes)?;
    let (tsw, tvsw) = match cfg.mode {
        TrafficMode::UnsatM => {
            let wq = if cfg.rate > 0.0 {
                let p = queueing::utilization(cfg.rate, cfg.frame_bytes, summary.delays.tvs);
                queueing::queue_stats(p, cfg.buffer, cfg.arrival_probability()).wq
            } else {
                0.0
            };
            let (tsw, tvsw) = queue_adjusted(summary.delays.ts.unwrap_or(f64::NAN), summary.delays.tvs, wq);
            (summary.delays.ts.map(|_| tsw), Some(tvsw))
        }
        _ => (None, None),
    };
    Ok(PerformanceReport {
        tau: fp.tau,
        a: fp.a,
        th,
        ps: Some(summary.ps),
        ts: summary.delays.ts,
        tvs: Some(summary.delays.tvs),
        tsw,
        tvsw,
        source: Source::Analytical,
        ci95: None,
    })
}
