//! M/M/1/k quantities for a finite MAC buffer holding `M` frames
//! (the frame in service included).
//!
//! The `p = 1` singularities of the closed forms are replaced by their
//! analytic limits; `p > 1` is evaluated as-is.

/// Steady-state statistics of the MAC buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueStats {
    pub p: f64,
    pub p0: f64,
    /// Probability the buffer is full (arrivals are blocked).
    pub p_m: f64,
    /// Mean number of frames waiting (not in service).
    pub lq: f64,
    /// Effective arrival rate, frames per symbol.
    pub lambda_e: f64,
    /// Mean queueing wait, symbols.
    pub wq: f64,
}

/// Queue utilisation `r * TVS / 2L`.
pub fn utilization(rate: f64, frame_bytes: u32, tvs: f64) -> f64 {
    rate * tvs / f64::from(2 * frame_bytes)
}

/// Probability the buffer is empty.
pub fn empty_prob(p: f64, buffer: u32) -> f64 {
    if p == 1.0 {
        return 1.0 / f64::from(buffer + 1);
    }
    (1.0 - p) / (1.0 - p.powi(buffer as i32 + 1))
}

/// Probability the buffer is full.
pub fn full_prob(p: f64, buffer: u32) -> f64 {
    if p == 1.0 {
        return 1.0 / f64::from(buffer + 1);
    }
    (1.0 - p) * p.powi(buffer as i32) / (1.0 - p.powi(buffer as i32 + 1))
}

/// Mean number of waiting frames.
pub fn mean_waiting(p: f64, buffer: u32) -> f64 {
    if buffer <= 1 {
        return 0.0;
    }
    let m = f64::from(buffer);
    let p0 = empty_prob(p, buffer);
    if p == 1.0 {
        // mean occupancy of the uniform distribution on 0..=M is M/2
        return m / 2.0 - (1.0 - p0);
    }
    let pm1 = p.powi(buffer as i32 + 1);
    (p / (1.0 - p) - (m + 1.0) * pm1 / (1.0 - pm1) - (1.0 - p0)).max(0.0)
}

/// Full buffer statistics for utilisation `p`, capacity `buffer` and
/// offered arrival rate `lambda` (frames per symbol).
pub fn queue_stats(p: f64, buffer: u32, lambda: f64) -> QueueStats {
    let p0 = empty_prob(p, buffer);
    let p_m = full_prob(p, buffer);
    let lq = mean_waiting(p, buffer);
    let lambda_e = lambda * (1.0 - p_m);
    let wq = if lambda_e > 0.0 { lq / lambda_e } else { 0.0 };
    QueueStats { p, p0, p_m, lq, lambda_e, wq }
}
