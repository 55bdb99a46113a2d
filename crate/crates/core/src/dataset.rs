//! Parameter sweeps, result tables and analytical/simulated comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analytical::{self, SolverSettings};
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::{symbols_to_ms, NetworkConfig, PerformanceReport, Source, TrafficMode};
use crate::simulator::{self, SimConfig, DEFAULT_REPLICATIONS};
use crate::stats::quantile_sorted;

pub const CSV_HEADER: [&str; 17] = [
    "mode",
    "N",
    "L",
    "r",
    "M",
    "source",
    "tau",
    "a",
    "TH",
    "PS",
    "TS_sym",
    "TVS_sym",
    "TSW_sym",
    "TVSW_sym",
    "converged",
    "ci_TH",
    "ci_PS",
];

/// Extra columns written with `--ms`.
pub const MS_COLUMNS: [&str; 4] = ["TS_ms", "TVS_ms", "TSW_ms", "TVSW_ms"];

/// Inclusive integer range `start:stop:step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntRange {
    pub start: u32,
    pub stop: u32,
    pub step: u32,
}

impl IntRange {
    pub fn single(v: u32) -> Self {
        Self { start: v, stop: v, step: 1 }
    }

    pub fn values(&self) -> Vec<u32> {
        if self.step == 0 || self.stop < self.start {
            return Vec::new();
        }
        (self.start..=self.stop).step_by(self.step as usize).collect()
    }
}

/// Inclusive real range `start:stop:step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

/// Round to 12 significant digits so decimal grids print as typed.
fn tidy(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

impl RealRange {
    pub fn single(v: f64) -> Self {
        Self { start: v, stop: v, step: 1.0 }
    }

    pub fn values(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start || !self.start.is_finite() || !self.stop.is_finite() {
            return Vec::new();
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| tidy(self.start + i as f64 * self.step)).collect()
    }
}

fn split_range(s: &str) -> Result<Vec<&str>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    match parts.len() {
        1 | 3 => Ok(parts),
        _ => Err(Error::Config(format!("range `{s}` must be `v` or `start:stop:step`"))),
    }
}

impl FromStr for IntRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |p: &str| p.parse::<u32>().map_err(|e| Error::Config(format!("range `{s}`: {e}")));
        let parts = split_range(s)?;
        if parts.len() == 1 {
            return Ok(Self::single(parse(parts[0])?));
        }
        let r = Self { start: parse(parts[0])?, stop: parse(parts[1])?, step: parse(parts[2])? };
        if r.step == 0 {
            return Err(Error::Config(format!("range `{s}` needs a positive step")));
        }
        Ok(r)
    }
}

impl FromStr for RealRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |p: &str| p.parse::<f64>().map_err(|e| Error::Config(format!("range `{s}`: {e}")));
        let parts = split_range(s)?;
        if parts.len() == 1 {
            return Ok(Self::single(parse(parts[0])?));
        }
        let r = Self { start: parse(parts[0])?, stop: parse(parts[1])?, step: parse(parts[2])? };
        if !(r.step > 0.0) {
            return Err(Error::Config(format!("range `{s}` needs a positive step")));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytical,
    Simulated,
    Both,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytical" => Ok(Engine::Analytical),
            "sim" | "simulated" => Ok(Engine::Simulated),
            "both" => Ok(Engine::Both),
            other => Err(Error::Config(format!("unknown engine `{other}`"))),
        }
    }
}

/// Simulation settings applied to every grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub horizon: u64,
    /// Defaults to 10% of the horizon.
    pub warmup: Option<u64>,
    pub replications: u32,
    pub base_seed: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { horizon: 1_000_000, warmup: None, replications: DEFAULT_REPLICATIONS, base_seed: 0 }
    }
}

impl SimSettings {
    pub fn sim_config(&self, net: NetworkConfig) -> SimConfig {
        let cfg = SimConfig::new(net, self.horizon).with_replications(self.replications).with_seed(self.base_seed);
        match self.warmup {
            Some(w) => cfg.with_warmup(w),
            None => cfg,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub mode: TrafficMode,
    pub nodes: IntRange,
    pub frame_bytes: IntRange,
    pub rate: RealRange,
    pub buffer: IntRange,
    pub engine: Engine,
    pub solver: SolverSettings,
    pub sim: SimSettings,
}

impl SweepSpec {
    /// Analytical-only sweep with default solver settings.
    pub fn analytical(
        mode: TrafficMode,
        nodes: IntRange,
        frame_bytes: IntRange,
        rate: RealRange,
        buffer: IntRange,
    ) -> Self {
        Self {
            mode,
            nodes,
            frame_bytes,
            rate,
            buffer,
            engine: Engine::Analytical,
            solver: SolverSettings::default(),
            sim: SimSettings::default(),
        }
    }
}

/// Cartesian product in lexicographic `(N, L, r, M)` order. Parameters a
/// mode ignores (rate and buffer when saturated) collapse to one point.
pub fn generate_grid(spec: &SweepSpec) -> Result<Vec<NetworkConfig>> {
    let (ns, ls, rs, ms) = (spec.nodes.values(), spec.frame_bytes.values(), spec.rate.values(), spec.buffer.values());
    if ns.is_empty() || ls.is_empty() || rs.is_empty() || ms.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut grid: Vec<NetworkConfig> = Vec::with_capacity(ns.len() * ls.len() * rs.len() * ms.len());
    for &n in &ns {
        for &l in &ls {
            for &r in &rs {
                for &m in &ms {
                    let cfg = NetworkConfig::new(spec.mode, n, l, r, m);
                    cfg.validate()?;
                    if grid.last() != Some(&cfg) {
                        grid.push(cfg);
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// One line of a result table. Metrics that are undefined or failed to
/// compute are `None` and serialize as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub mode: TrafficMode,
    pub nodes: u32,
    pub frame_bytes: u32,
    pub rate: f64,
    pub buffer: u32,
    pub source: Source,
    pub tau: Option<f64>,
    pub a: Option<f64>,
    pub th: Option<f64>,
    pub ps: Option<f64>,
    pub ts: Option<f64>,
    pub tvs: Option<f64>,
    pub tsw: Option<f64>,
    pub tvsw: Option<f64>,
    /// Analytical rows only.
    pub converged: Option<bool>,
    pub ci_th: Option<f64>,
    pub ci_ps: Option<f64>,
}

/// Identity of a grid point, shared by its analytical and simulated rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConfigKey {
    pub mode: TrafficMode,
    pub nodes: u32,
    pub frame_bytes: u32,
    rate_bits: u64,
    pub buffer: u32,
}

impl ConfigKey {
    pub fn rate(&self) -> f64 {
        f64::from_bits(self.rate_bits)
    }
}

impl fmt::Display for ConfigKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} N={} L={} r={} M={}", self.mode, self.nodes, self.frame_bytes, self.rate(), self.buffer)
    }
}

impl ResultRow {
    fn blank(cfg: &NetworkConfig, source: Source) -> Self {
        Self {
            mode: cfg.mode,
            nodes: cfg.nodes,
            frame_bytes: cfg.frame_bytes,
            rate: cfg.rate,
            buffer: cfg.buffer,
            source,
            tau: None,
            a: None,
            th: None,
            ps: None,
            ts: None,
            tvs: None,
            tsw: None,
            tvsw: None,
            converged: None,
            ci_th: None,
            ci_ps: None,
        }
    }

    pub fn from_report(cfg: &NetworkConfig, report: &PerformanceReport) -> Self {
        let mut row = Self::blank(cfg, report.source);
        row.tau = Some(report.tau);
        row.a = Some(report.a);
        row.th = Some(report.th);
        row.ps = report.ps;
        row.ts = report.ts;
        row.tvs = report.tvs;
        row.tsw = report.tsw;
        row.tvsw = report.tvsw;
        match report.source {
            Source::Analytical => row.converged = Some(true),
            Source::Simulated => {
                row.ci_th = report.ci95.map(|c| c.th);
                row.ci_ps = report.ci95.and_then(|c| c.ps);
            }
        }
        row
    }

    pub fn key(&self) -> ConfigKey {
        ConfigKey {
            mode: self.mode,
            nodes: self.nodes,
            frame_bytes: self.frame_bytes,
            // -0.0 and 0.0 are the same grid point
            rate_bits: (self.rate + 0.0).to_bits(),
            buffer: self.buffer,
        }
    }

    pub fn config(&self) -> NetworkConfig {
        NetworkConfig::new(self.mode, self.nodes, self.frame_bytes, self.rate, self.buffer)
    }
}

/// Solve one configuration; failures become a non-converged row.
pub fn analytical_row(cfg: &NetworkConfig, settings: &SolverSettings) -> ResultRow {
    let outcome = analytical::solve(cfg, settings).and_then(|fp| metrics::report(cfg, &fp));
    match outcome {
        Ok(report) => ResultRow::from_report(cfg, &report),
        Err(e) => {
            log::warn!("analytical point {cfg:?} failed: {e}");
            let mut row = ResultRow::blank(cfg, Source::Analytical);
            row.converged = Some(false);
            row
        }
    }
}

pub fn simulated_row(cfg: &NetworkConfig, settings: &SimSettings) -> ResultRow {
    match simulator::run(&settings.sim_config(*cfg)) {
        Ok(report) => ResultRow::from_report(cfg, &report),
        Err(e) => {
            log::warn!("simulated point {cfg:?} failed: {e}");
            ResultRow::blank(cfg, Source::Simulated)
        }
    }
}

/// Evaluate every grid point with the requested engine(s). Rows come back
/// in grid order, analytical before simulated, whatever the execution order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    let grid = generate_grid(spec)?;
    let rows: Vec<Vec<ResultRow>> = grid
        .par_iter()
        .map(|cfg| {
            let mut out = Vec::with_capacity(2);
            if matches!(spec.engine, Engine::Analytical | Engine::Both) {
                out.push(analytical_row(cfg, &spec.solver));
            }
            if matches!(spec.engine, Engine::Simulated | Engine::Both) {
                out.push(simulated_row(cfg, &spec.sim));
            }
            out
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn row_record(row: &ResultRow, with_ms: bool) -> Vec<String> {
    let mut rec = vec![
        row.mode.as_str().to_string(),
        row.nodes.to_string(),
        row.frame_bytes.to_string(),
        row.rate.to_string(),
        row.buffer.to_string(),
        row.source.as_str().to_string(),
        fmt_opt(row.tau),
        fmt_opt(row.a),
        fmt_opt(row.th),
        fmt_opt(row.ps),
        fmt_opt(row.ts),
        fmt_opt(row.tvs),
        fmt_opt(row.tsw),
        fmt_opt(row.tvsw),
        row.converged.map(|c| c.to_string()).unwrap_or_default(),
        fmt_opt(row.ci_th),
        fmt_opt(row.ci_ps),
    ];
    if with_ms {
        for v in [row.ts, row.tvs, row.tsw, row.tvsw] {
            rec.push(fmt_opt(v.map(symbols_to_ms)));
        }
    }
    rec
}

pub fn write_csv_to<W: io::Write>(rows: &[ResultRow], out: W, with_ms: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if with_ms {
        header.extend(MS_COLUMNS);
    }
    w.write_record(&header)?;
    for row in rows {
        w.write_record(row_record(row, with_ms))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(rows: &[ResultRow], path: &Path, with_ms: bool) -> Result<()> {
    write_csv_to(rows, std::fs::File::create(path)?, with_ms)
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn field(rec: &csv::StringRecord, i: usize, line: u64) -> Result<&str> {
    rec.get(i).ok_or_else(|| parse_err(line, format!("missing column {}", CSV_HEADER[i])))
}

fn parse_num<T: FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T>
where
    T::Err: fmt::Display,
{
    let s = field(rec, i, line)?;
    s.parse().map_err(|e| parse_err(line, format!("column {}: `{s}`: {e}", CSV_HEADER[i])))
}

fn parse_opt(rec: &csv::StringRecord, i: usize, line: u64) -> Result<Option<f64>> {
    let s = field(rec, i, line)?;
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|e| parse_err(line, format!("column {}: `{s}`: {e}", CSV_HEADER[i])))
}

pub fn read_csv_from<R: io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(parse_err(1, "empty file")),
    };
    let plain = header.iter().eq(CSV_HEADER.iter().copied());
    let with_ms = header.iter().eq(CSV_HEADER.iter().chain(MS_COLUMNS.iter()).copied());
    if !plain && !with_ms {
        return Err(parse_err(1, "unexpected header"));
    }
    let width = header.len();
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let text = |i| field(&rec, i, line);
        let mode: TrafficMode = text(0)?.parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
        let source: Source = text(5)?.parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
        let converged = match text(14)? {
            "" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return Err(parse_err(line, format!("column converged: `{other}`"))),
        };
        rows.push(ResultRow {
            mode,
            nodes: parse_num(&rec, 1, line)?,
            frame_bytes: parse_num(&rec, 2, line)?,
            rate: parse_num(&rec, 3, line)?,
            buffer: parse_num(&rec, 4, line)?,
            source,
            tau: parse_opt(&rec, 6, line)?,
            a: parse_opt(&rec, 7, line)?,
            th: parse_opt(&rec, 8, line)?,
            ps: parse_opt(&rec, 9, line)?,
            ts: parse_opt(&rec, 10, line)?,
            tvs: parse_opt(&rec, 11, line)?,
            tsw: parse_opt(&rec, 12, line)?,
            tvsw: parse_opt(&rec, 13, line)?,
            converged,
            ci_th: parse_opt(&rec, 15, line)?,
            ci_ps: parse_opt(&rec, 16, line)?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    read_csv_from(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Tau,
    A,
    Th,
    Ps,
    Ts,
    Tvs,
    Tsw,
    Tvsw,
}

impl Metric {
    pub const ALL: [Metric; 8] =
        [Metric::Tau, Metric::A, Metric::Th, Metric::Ps, Metric::Ts, Metric::Tvs, Metric::Tsw, Metric::Tvsw];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Tau => "tau",
            Metric::A => "a",
            Metric::Th => "TH",
            Metric::Ps => "PS",
            Metric::Ts => "TS_sym",
            Metric::Tvs => "TVS_sym",
            Metric::Tsw => "TSW_sym",
            Metric::Tvsw => "TVSW_sym",
        }
    }

    pub fn of(&self, row: &ResultRow) -> Option<f64> {
        match self {
            Metric::Tau => row.tau,
            Metric::A => row.a,
            Metric::Th => row.th,
            Metric::Ps => row.ps,
            Metric::Ts => row.ts,
            Metric::Tvs => row.tvs,
            Metric::Tsw => row.tsw,
            Metric::Tvsw => row.tvsw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Difference {
    pub key: ConfigKey,
    pub metric: Metric,
    pub analytical: f64,
    pub simulated: f64,
    /// `analytical - simulated`.
    pub diff: f64,
    pub abs_diff: f64,
    /// `|diff| / |simulated|`; `None` when the simulated value is zero.
    pub rel_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub metric: Metric,
    pub count: usize,
    pub median_diff: f64,
    pub median_abs: f64,
    pub p90_abs: f64,
    pub max_abs: f64,
    pub median_rel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub differences: Vec<Difference>,
    pub summaries: Vec<MetricSummary>,
}

fn index_rows(rows: &[ResultRow], label: &str) -> Result<BTreeMap<ConfigKey, ResultRow>> {
    let mut map = BTreeMap::new();
    for row in rows {
        if map.insert(row.key(), row.clone()).is_some() {
            return Err(Error::KeyMismatch(format!("duplicate {label} row for {}", row.key())));
        }
    }
    Ok(map)
}

/// Per-point, per-metric differences between analytical and simulated rows,
/// plus per-metric quantile summaries. Every key must appear on both sides.
pub fn compare(analytical_rows: &[ResultRow], simulated_rows: &[ResultRow]) -> Result<Comparison> {
    let an = index_rows(analytical_rows, "analytical")?;
    let sim = index_rows(simulated_rows, "simulated")?;
    let a_keys: BTreeSet<_> = an.keys().copied().collect();
    let s_keys: BTreeSet<_> = sim.keys().copied().collect();
    let orphans: Vec<String> = a_keys
        .symmetric_difference(&s_keys)
        .map(|k| format!("{k} (only {})", if a_keys.contains(k) { "analytical" } else { "simulated" }))
        .collect();
    if !orphans.is_empty() {
        return Err(Error::KeyMismatch(orphans.join("; ")));
    }
    let mut differences = Vec::new();
    for (key, a_row) in &an {
        let s_row = &sim[key];
        for metric in Metric::ALL {
            if let (Some(av), Some(sv)) = (metric.of(a_row), metric.of(s_row)) {
                let diff = av - sv;
                differences.push(Difference {
                    key: *key,
                    metric,
                    analytical: av,
                    simulated: sv,
                    diff,
                    abs_diff: diff.abs(),
                    rel_diff: (sv != 0.0).then(|| diff.abs() / sv.abs()),
                });
            }
        }
    }
    let mut summaries = Vec::new();
    for metric in Metric::ALL {
        let of_metric: Vec<&Difference> = differences.iter().filter(|d| d.metric == metric).collect();
        if of_metric.is_empty() {
            continue;
        }
        let sorted = |f: &dyn Fn(&Difference) -> Option<f64>| {
            let mut v: Vec<f64> = of_metric.iter().filter_map(|d| f(d)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let diffs = sorted(&|d| Some(d.diff));
        let abs = sorted(&|d| Some(d.abs_diff));
        let rel = sorted(&|d| d.rel_diff);
        summaries.push(MetricSummary {
            metric,
            count: of_metric.len(),
            median_diff: quantile_sorted(&diffs, 0.5).unwrap_or_default(),
            median_abs: quantile_sorted(&abs, 0.5).unwrap_or_default(),
            p90_abs: quantile_sorted(&abs, 0.9).unwrap_or_default(),
            max_abs: abs.last().copied().unwrap_or_default(),
            median_rel: quantile_sorted(&rel, 0.5),
        });
    }
    Ok(Comparison { differences, summaries })
}

pub const DIFF_HEADER: [&str; 11] =
    ["mode", "N", "L", "r", "M", "metric", "analytical", "simulated", "diff", "abs_diff", "rel_diff"];

pub fn write_differences_to<W: io::Write>(cmp: &Comparison, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DIFF_HEADER)?;
    for d in &cmp.differences {
        w.write_record([
            d.key.mode.as_str().to_string(),
            d.key.nodes.to_string(),
            d.key.frame_bytes.to_string(),
            d.key.rate().to_string(),
            d.key.buffer.to_string(),
            d.metric.name().to_string(),
            d.analytical.to_string(),
            d.simulated.to_string(),
            d.diff.to_string(),
            d.abs_diff.to_string(),
            fmt_opt(d.rel_diff),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(nodes: &str, rate: &str) -> SweepSpec {
        SweepSpec::analytical(
            TrafficMode::Unsat1,
            nodes.parse().unwrap(),
            IntRange::single(100),
            rate.parse().unwrap(),
            IntRange::single(1),
        )
    }

    #[test]
    fn grid_order_and_size() {
        let g = generate_grid(&spec("2:4:1", "0.05")).unwrap();
        assert_eq!(g.iter().map(|c| c.nodes).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(generate_grid(&spec("5", "0.01")).unwrap().len(), 1);
        let g = generate_grid(&spec("2:10:4", "0.001:0.13:0.001")).unwrap();
        assert_eq!(g.len(), 3 * 130);
        assert_eq!(g[1].rate, 0.002);
        assert_eq!(g[129].rate, 0.13);
        assert_eq!(g[130].nodes, 6);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let mut s = spec("2", "0.05");
        s.nodes = IntRange { start: 5, stop: 2, step: 1 };
        assert!(generate_grid(&s).is_err());
    }

    #[test]
    fn saturated_grid_ignores_rate() {
        let mut s = spec("2:3:1", "0.01:0.05:0.01");
        s.mode = TrafficMode::Saturated;
        assert_eq!(generate_grid(&s).unwrap().len(), 2);
    }

    #[test]
    fn range_parsing() {
        assert_eq!("3".parse::<IntRange>().unwrap(), IntRange::single(3));
        assert!("1:2".parse::<IntRange>().is_err());
        assert!("1:5:0".parse::<IntRange>().is_err());
        assert!("0.1:0.2:-1".parse::<RealRange>().is_err());
    }

    #[test]
    fn zero_rate_row() {
        let rows = run_sweep(&spec("5", "0")).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].th, rows[0].ps), (Some(0.0), Some(1.0)));
    }

    #[test]
    fn both_engines_share_key() {
        let mut s = spec("3", "0.05");
        s.engine = Engine::Both;
        s.sim = SimSettings { horizon: 20_000, warmup: None, replications: 2, base_seed: 1 };
        let rows = run_sweep(&s).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].key(), rows[1].key());
        assert_eq!((rows[0].source, rows[1].source), (Source::Analytical, Source::Simulated));
        assert!(rows[1].ci_th.is_some());
    }

    #[test]
    fn non_converged_point_is_kept() {
        let mut s = spec("3", "0.05");
        s.solver.max_iterations = 2;
        let rows = run_sweep(&s).unwrap();
        assert_eq!(rows[0].converged, Some(false));
        assert_eq!(rows[0].th, None);
    }

    #[test]
    fn csv_round_trip_and_empty_fields() {
        let mut s = spec("2:3:1", "0.01:0.03:0.01");
        s.mode = TrafficMode::UnsatM;
        s.buffer = IntRange::single(4);
        let mut rows = run_sweep(&s).unwrap();
        rows[0].ts = None;
        let mut buf = Vec::new();
        write_csv_to(&rows, &mut buf, false).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        let second = text.lines().nth(1).unwrap();
        assert!(second.contains(",,"), "{second}");
        assert_eq!(read_csv_from(buf.as_slice()).unwrap(), rows);

        let mut ms = Vec::new();
        write_csv_to(&rows, &mut ms, true).unwrap();
        assert_eq!(read_csv_from(ms.as_slice()).unwrap(), rows);
    }

    #[test]
    fn malformed_row_names_its_line() {
        let text = format!("{}\nunsat1,2,100,0.05,1,analytical,x,,,,,,,,true,,\n", CSV_HEADER.join(","));
        match read_csv_from(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("tau"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_csv_from("a,b\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn identical_inputs_compare_to_zero() {
        let rows = run_sweep(&spec("2:4:1", "0.02:0.06:0.02")).unwrap();
        let sim: Vec<ResultRow> = rows
            .iter()
            .cloned()
            .map(|mut r| {
                r.source = Source::Simulated;
                r
            })
            .collect();
        let cmp = compare(&rows, &sim).unwrap();
        assert!(!cmp.differences.is_empty());
        assert!(cmp.differences.iter().all(|d| d.abs_diff == 0.0));
        assert!(cmp.summaries.iter().all(|s| s.max_abs == 0.0));
    }

    #[test]
    fn orphans_are_reported() {
        let a = run_sweep(&spec("2:3:1", "0.05")).unwrap();
        let s = run_sweep(&spec("3:4:1", "0.05")).unwrap();
        match compare(&a, &s) {
            Err(Error::KeyMismatch(msg)) => {
                assert!(msg.contains("N=2") && msg.contains("N=4"), "{msg}");
                assert!(!msg.contains("N=3"));
            }
            other => panic!("{other:?}"),
        }
    }
}
