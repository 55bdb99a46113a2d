//! Protocol constants, scenario definitions and the quantities shared by the
//! analytical model, the simulator and the predictor.
//!
//! Every duration is an integer count of symbols (one symbol is one
//! mini-slot, 16 µs at 250 kb/s). Real-valued time only shows up at report
//! boundaries.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Unslotted CSMA/CA MAC attributes with IEEE 802.15.4 (2.4 GHz O-QPSK)
/// defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolConstants {
    mac_min_be: u32,
    a_max_be: u32,
    mac_max_csma_backoffs: u32,
    a_max_frame_retries: u32,
    mac_ack_wait_duration: u32,
    a_turnaround_time: u32,
    t_ack: u32,
    ack_frame_symbols: u32,
    cca_symbols: u32,
    unit_backoff_period: u32,
}

impl Default for ProtocolConstants {
    fn default() -> Self {
        Self::IEEE_802_15_4
    }
}

impl ProtocolConstants {
    pub const IEEE_802_15_4: Self = Self {
        mac_min_be: 3,
        a_max_be: 5,
        mac_max_csma_backoffs: 4,
        a_max_frame_retries: 3,
        mac_ack_wait_duration: 54,
        a_turnaround_time: 12,
        t_ack: 20,
        ack_frame_symbols: 22,
        cca_symbols: 8,
        unit_backoff_period: 20,
    };

    pub const SYMBOL_DURATION_US: f64 = 16.0;

    pub fn mac_min_be(&self) -> u32 {
        self.mac_min_be
    }

    pub fn a_max_be(&self) -> u32 {
        self.a_max_be
    }

    pub fn mac_max_csma_backoffs(&self) -> u32 {
        self.mac_max_csma_backoffs
    }

    pub fn a_max_frame_retries(&self) -> u32 {
        self.a_max_frame_retries
    }

    /// Symbols a sender waits after the end of its data frame before
    /// declaring the ACK lost.
    pub fn mac_ack_wait_duration(&self) -> u32 {
        self.mac_ack_wait_duration
    }

    /// RX-to-TX turnaround after a clear CCA.
    pub fn a_turnaround_time(&self) -> u32 {
        self.a_turnaround_time
    }

    /// Gap between the end of a data frame and the start of its ACK.
    pub fn t_ack(&self) -> u32 {
        self.t_ack
    }

    pub fn ack_frame_symbols(&self) -> u32 {
        self.ack_frame_symbols
    }

    pub fn cca_symbols(&self) -> u32 {
        self.cca_symbols
    }

    pub fn unit_backoff_period(&self) -> u32 {
        self.unit_backoff_period
    }

    /// Number of backoff stages a frame may visit (NB = 0..=macMaxCSMABackoffs).
    pub fn backoff_stages(&self) -> u32 {
        self.mac_max_csma_backoffs + 1
    }

    /// Backoff exponent used at stage `nb`.
    pub fn backoff_exponent(&self, nb: u32) -> u32 {
        (self.mac_min_be + nb).min(self.a_max_be)
    }

    /// Contention window `w_i = 2^BE` (in backoff periods) at stage `nb`.
    pub fn backoff_window(&self, nb: u32) -> u32 {
        1 << self.backoff_exponent(nb)
    }

    /// Mean backoff delay in symbols at stage `nb`: `(w_i - 1) * 20 / 2`.
    pub fn mean_backoff(&self, nb: u32) -> u32 {
        (self.backoff_window(nb) - 1) * self.unit_backoff_period / 2
    }

    /// Mean time a frame spends before being discarded for exceeding
    /// macMaxCSMABackoffs: every stage's mean backoff plus its CCA.
    pub fn access_failure_time(&self) -> u32 {
        (0..self.backoff_stages()).map(|nb| self.mean_backoff(nb) + self.cca_symbols).sum()
    }
}

/// Traffic regime of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficMode {
    /// Unsaturated traffic, single-frame MAC buffer.
    Unsat1,
    /// Unsaturated traffic, `M > 1` frame MAC buffer.
    UnsatM,
    /// Every node always has a frame queued.
    Saturated,
}

impl TrafficMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrafficMode::Unsat1 => "unsat1",
            TrafficMode::UnsatM => "unsatm",
            TrafficMode::Saturated => "sat",
        }
    }
}

impl fmt::Display for TrafficMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrafficMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unsat1" => Ok(TrafficMode::Unsat1),
            "unsatm" => Ok(TrafficMode::UnsatM),
            "sat" | "saturated" => Ok(TrafficMode::Saturated),
            other => Err(Error::Config(format!("unknown traffic mode `{other}`"))),
        }
    }
}

/// One scenario: `N` sensor nodes around a sink, `L`-byte frames arriving
/// at `r` frames per frame duration into an `M`-frame MAC buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub nodes: u32,
    pub frame_bytes: u32,
    /// Frames per frame duration (one frame duration is `2L` symbols).
    /// Ignored in saturated mode.
    pub rate: f64,
    /// MAC buffer capacity in frames. Ignored in saturated mode.
    pub buffer: u32,
    pub mode: TrafficMode,
}

pub const NOMINAL_FRAME_BYTES: std::ops::RangeInclusive<u32> = 30..=127;

impl NetworkConfig {
    pub fn unsat1(nodes: u32, frame_bytes: u32, rate: f64) -> Self {
        Self { nodes, frame_bytes, rate, buffer: 1, mode: TrafficMode::Unsat1 }
    }

    pub fn unsat_m(nodes: u32, frame_bytes: u32, rate: f64, buffer: u32) -> Self {
        Self { nodes, frame_bytes, rate, buffer, mode: TrafficMode::UnsatM }
    }

    pub fn saturated(nodes: u32, frame_bytes: u32) -> Self {
        Self { nodes, frame_bytes, rate: 0.0, buffer: 1, mode: TrafficMode::Saturated }
    }

    /// Build a config from loose parameters, forcing the mode's conventions
    /// (`M = 1` for unsat1, rate/buffer unused when saturated).
    pub fn new(mode: TrafficMode, nodes: u32, frame_bytes: u32, rate: f64, buffer: u32) -> Self {
        match mode {
            TrafficMode::Unsat1 => Self::unsat1(nodes, frame_bytes, rate),
            TrafficMode::UnsatM => Self::unsat_m(nodes, frame_bytes, rate, buffer),
            TrafficMode::Saturated => Self::saturated(nodes, frame_bytes),
        }
    }

    /// Frame duration in symbols: one byte is two symbols.
    pub fn frame_symbols(&self) -> u32 {
        2 * self.frame_bytes
    }

    /// Per-node probability of a new frame in one mini-slot, `r / 2L`.
    pub fn arrival_probability(&self) -> f64 {
        match self.mode {
            TrafficMode::Saturated => 1.0,
            _ => self.rate / f64::from(self.frame_symbols()),
        }
    }

    /// Checks shared by every consumer. The simulator accepts `N = 1`.
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 1 {
            return Err(Error::Config("node count must be at least 1".into()));
        }
        if self.frame_bytes < 1 {
            return Err(Error::Config("frame length must be at least 1 byte".into()));
        }
        if !NOMINAL_FRAME_BYTES.contains(&self.frame_bytes) {
            log::warn!("frame length {} bytes is outside the nominal 30..=127 range", self.frame_bytes);
        }
        match self.mode {
            TrafficMode::Saturated => {}
            TrafficMode::Unsat1 | TrafficMode::UnsatM => {
                if !(self.rate.is_finite() && self.rate >= 0.0) {
                    return Err(Error::Config(format!("arrival rate {} must be >= 0", self.rate)));
                }
                if self.arrival_probability() > 1.0 {
                    return Err(Error::Config(format!("arrival rate {} exceeds one frame per mini-slot", self.rate)));
                }
            }
        }
        match self.mode {
            TrafficMode::Unsat1 if self.buffer != 1 => {
                Err(Error::Config("unsat1 mode requires a single-frame buffer".into()))
            }
            TrafficMode::UnsatM if self.buffer < 2 => {
                Err(Error::Config("unsatm mode requires a buffer of at least 2 frames".into()))
            }
            _ => Ok(()),
        }
    }

    /// The analytical models additionally need at least two contending nodes.
    pub fn validate_analytical(&self) -> Result<()> {
        self.validate()?;
        if self.nodes < 2 {
            return Err(Error::Config("the analytical model needs at least 2 nodes".into()));
        }
        Ok(())
    }
}

/// Probabilities derived from `(tau, a)` for a given population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementaryProbs {
    pub tau: f64,
    pub a: f64,
    /// None of the other `N - 1` nodes starts a CCA in a mini-slot.
    pub k: f64,
    /// None of the `N` nodes senses the channel.
    pub x: f64,
    /// Exactly one node senses the channel.
    pub y: f64,
    /// None of the remaining `N - 1` nodes senses the channel.
    pub z: f64,
    /// Probability an attempt ends in collision: `(1 - a^5)(1 - k^26)`.
    pub d: f64,
    /// New-frame probability per mini-slot, `r / 2L`.
    pub p_arrival: f64,
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} is not a probability")))
    }
}

pub fn derived_probs(tau: f64, a: f64, nodes: u32, frame_bytes: u32, rate: f64) -> Result<ElementaryProbs> {
    check_probability("tau", tau)?;
    check_probability("a", a)?;
    if nodes < 1 {
        return Err(Error::Domain("node count must be >= 1".into()));
    }
    if frame_bytes < 1 {
        return Err(Error::Domain("frame length must be >= 1".into()));
    }
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::Domain(format!("rate {rate} must be >= 0")));
    }
    let idle = 1.0 - tau;
    let k = idle.powi(nodes as i32 - 1);
    let x = idle * k;
    let y = f64::from(nodes) * tau * k;
    let d = (1.0 - a.powi(5)) * (1.0 - k.powi(26));
    Ok(ElementaryProbs { tau, a, k, x, y, z: k, d, p_arrival: rate / f64::from(2 * frame_bytes) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Analytical,
    Simulated,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Analytical => "analytical",
            Source::Simulated => "simulated",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytical" => Ok(Source::Analytical),
            "simulated" => Ok(Source::Simulated),
            other => Err(Error::Config(format!("unknown source `{other}`"))),
        }
    }
}

/// 95% confidence half-widths across simulation replications.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConfidenceHalfWidths {
    pub tau: f64,
    pub a: f64,
    pub th: f64,
    pub ps: Option<f64>,
    pub ts: Option<f64>,
    pub tvs: Option<f64>,
    pub tsw: Option<f64>,
    pub tvsw: Option<f64>,
}

/// The eight performance metrics of one scenario. Delays are in symbols.
///
/// A metric that is undefined for the scenario (for instance `ts` when no
/// frame was ever delivered) is `None`, never zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceReport {
    pub tau: f64,
    pub a: f64,
    pub th: f64,
    pub ps: Option<f64>,
    pub ts: Option<f64>,
    pub tvs: Option<f64>,
    /// Present only for the `M > 1` buffer model.
    pub tsw: Option<f64>,
    pub tvsw: Option<f64>,
    pub source: Source,
    pub ci95: Option<ConfidenceHalfWidths>,
}

pub fn symbols_to_ms(symbols: f64) -> f64 {
    symbols * ProtocolConstants::SYMBOL_DURATION_US / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn backoff_windows_and_means() {
        let c = ProtocolConstants::default();
        let w: Vec<u32> = (0..5).map(|i| c.backoff_window(i)).collect();
        assert_eq!(w, vec![8, 16, 32, 32, 32]);
        let b: Vec<u32> = (0..5).map(|i| c.mean_backoff(i)).collect();
        assert_eq!(b, vec![70, 150, 310, 310, 310]);
    }

    #[test]
    fn access_failure_time_is_1190() {
        assert_eq!(ProtocolConstants::default().access_failure_time(), 1190);
    }

    #[test]
    fn derived_probs_all_idle() {
        let e = derived_probs(0.0, 0.0, 10, 100, 0.01).unwrap();
        assert_eq!((e.k, e.x, e.y, e.z, e.d), (1.0, 1.0, 0.0, 1.0, 0.0));
        assert_abs_diff_eq!(e.p_arrival, 5e-5, epsilon = 1e-18);
    }

    #[test]
    fn derived_probs_certain_sensing() {
        // every other node always transmits, so every attempt collides: D = 1
        let e = derived_probs(1.0, 0.0, 2, 100, 0.01).unwrap();
        assert_eq!((e.k, e.x, e.y, e.z, e.d), (0.0, 0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn derived_probs_half() {
        let e = derived_probs(0.5, 0.5, 2, 100, 0.02).unwrap();
        assert_eq!((e.k, e.x, e.y, e.z), (0.5, 0.25, 0.5, 0.5));
        assert_eq!(e.d, (1.0 - 0.5f64.powi(5)) * (1.0 - 0.5f64.powi(26)));
        assert_eq!(e.p_arrival, 1e-4);
    }

    #[test]
    fn derived_probs_rejects_out_of_range() {
        assert!(derived_probs(1.5, 0.0, 2, 100, 0.1).is_err());
        assert!(derived_probs(0.1, -0.1, 2, 100, 0.1).is_err());
        assert!(derived_probs(0.1, 0.1, 0, 100, 0.1).is_err());
        assert!(derived_probs(0.1, 0.1, 2, 0, 0.1).is_err());
        assert!(derived_probs(0.1, 0.1, 2, 100, -1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(NetworkConfig::unsat1(10, 100, 0.05).validate_analytical().is_ok());
        assert!(NetworkConfig::unsat1(1, 100, 0.05).validate().is_ok());
        assert!(NetworkConfig::unsat1(1, 100, 0.05).validate_analytical().is_err());
        assert!(NetworkConfig::unsat_m(10, 100, 0.05, 1).validate().is_err());
        let mut c = NetworkConfig::unsat1(10, 100, 0.05);
        c.buffer = 3;
        assert!(c.validate().is_err());
        // outside the nominal range only warns
        assert!(NetworkConfig::saturated(5, 10).validate().is_ok());
        assert_eq!(NetworkConfig::new(TrafficMode::Unsat1, 3, 50, 0.1, 7).buffer, 1);
    }

    #[test]
    fn mode_round_trip() {
        for m in [TrafficMode::Unsat1, TrafficMode::UnsatM, TrafficMode::Saturated] {
            assert_eq!(m.as_str().parse::<TrafficMode>().unwrap(), m);
        }
    }

    proptest! {
        #[test]
        fn no_sensing_identities(tau in 0.0f64..=1.0, n in 1u32..200, a in 0.0f64..=1.0) {
            let e = derived_probs(tau, a, n, 100, 0.05).unwrap();
            prop_assert!(e.x + e.y <= 1.0 + 1e-12);
            prop_assert!((e.x - (1.0 - tau) * e.k).abs() <= 1e-12);
            prop_assert_eq!(e.z, e.k);
            let again = derived_probs(tau, a, n, 100, 0.05).unwrap();
            prop_assert_eq!(e, again);
        }
    }
}
