//! Parameter sweeps over the scenarios used to compare the schemes.
//!
//! * `equal-snr`: `N` identical channels, optimised AoI of every scheme per SNR.
//! * `two-channel`: two channels with a fixed SNR sum, channel 0 getting stronger.
//! * `three-channel-split`: MS bit allocation methods with a third fixed channel.
//!
//! Rows are computed in parallel and emitted in grid order.

use std::io::Write;

use mcaoi::optimize::{optimize_ms_fixed, OptimumReport};
use mcaoi::{
    capacity_proportional_split, optimize_blocklength, optimize_ms, BlocklengthRange, ChannelSet, SchemeSpec,
    ShiftMode, ShiftSearch,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::{join_f64, join_u64, sig9};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    EqualSnr,
    TwoChannel,
    ThreeChannelSplit,
}

impl SweepKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            SweepKind::EqualSnr => "equal-snr",
            SweepKind::TwoChannel => "two-channel",
            SweepKind::ThreeChannelSplit => "three-channel-split",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ShiftArg {
    Integer,
    Continuous,
}

impl From<ShiftArg> for ShiftMode {
    fn from(value: ShiftArg) -> Self {
        match value {
            ShiftArg::Integer => ShiftMode::Integer,
            ShiftArg::Continuous => ShiftMode::Continuous,
        }
    }
}

/// Sweep description as read from a JSON config file. Every field except
/// `version` and `kind` is optional; command-line flags override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfigFile {
    pub version: u32,
    pub kind: Option<SweepKind>,
    pub k: Option<Vec<u64>>,
    pub channels: Option<Vec<usize>>,
    pub snr: Option<Vec<f64>>,
    pub sum_snr: Option<f64>,
    pub gamma0_start: Option<f64>,
    pub gamma0_stop: Option<f64>,
    pub gamma0_step: Option<f64>,
    pub fixed_snr: Option<f64>,
    pub n_min: Option<u64>,
    pub n_max: Option<u64>,
    pub shifts: Option<ShiftArg>,
    pub format: Option<OutputFormat>,
}

/// Fully resolved sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub version: u32,
    pub kind: SweepKind,
    pub k: Vec<u64>,
    /// Channel counts (equal-snr only).
    pub channels: Vec<usize>,
    /// SNR grid (equal-snr only).
    pub snr: Vec<f64>,
    /// Total SNR shared by channels 0 and 1.
    pub sum_snr: f64,
    pub gamma0_start: f64,
    pub gamma0_stop: f64,
    pub gamma0_step: f64,
    /// SNR of channel 2 in the three-channel sweep.
    pub fixed_snr: f64,
    pub n_min: Option<u64>,
    pub n_max: Option<u64>,
    pub shifts: ShiftArg,
    pub format: OutputFormat,
}

impl SweepSpec {
    pub fn defaults(kind: SweepKind) -> Self {
        let mut snr = vec![0.5];
        snr.extend((1..=10).map(f64::from));
        Self {
            version: SCHEMA_VERSION,
            kind,
            k: match kind {
                SweepKind::EqualSnr => vec![16, 32],
                _ => vec![16],
            },
            channels: vec![2, 3, 4],
            snr,
            sum_snr: 4.0,
            gamma0_start: 2.0,
            gamma0_stop: 3.9,
            gamma0_step: 0.1,
            fixed_snr: 2.8,
            n_min: None,
            n_max: None,
            shifts: ShiftArg::Integer,
            format: OutputFormat::Csv,
        }
    }

    /// Applies the non-empty fields of `file` on top of the defaults for its kind.
    pub fn from_file(file: &SweepConfigFile, kind: Option<SweepKind>) -> Result<Self, CliError> {
        if file.version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported sweep config version {} (expected {SCHEMA_VERSION})",
                file.version
            )));
        }
        let kind = kind
            .or(file.kind)
            .ok_or_else(|| CliError::Usage("sweep kind missing from both flags and config".into()))?;
        let mut spec = Self::defaults(kind);
        spec.overlay(file);
        Ok(spec)
    }

    pub fn overlay(&mut self, o: &SweepConfigFile) {
        if let Some(v) = &o.k {
            self.k = v.clone();
        }
        if let Some(v) = &o.channels {
            self.channels = v.clone();
        }
        if let Some(v) = &o.snr {
            self.snr = v.clone();
        }
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = o.$f { self.$f = v; })*};
        }
        take!(sum_snr, gamma0_start, gamma0_stop, gamma0_step, fixed_snr, shifts, format);
        if o.n_min.is_some() {
            self.n_min = o.n_min;
        }
        if o.n_max.is_some() {
            self.n_max = o.n_max;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.k.is_empty() {
            return bad("k grid is empty");
        }
        match self.kind {
            SweepKind::EqualSnr => {
                if self.channels.is_empty() || self.snr.is_empty() {
                    return bad("equal-snr sweep needs non-empty channel and SNR grids");
                }
                if self.channels.contains(&0) {
                    return bad("channel counts must be at least 1");
                }
            }
            _ => {
                if !(self.gamma0_step > 0.0) || self.gamma0_stop < self.gamma0_start {
                    return bad("gamma0 grid is empty");
                }
                if !(self.gamma0_stop < self.sum_snr) || !(self.gamma0_start > 0.0) {
                    return bad("gamma0 grid must stay strictly inside (0, sum_snr)");
                }
            }
        }
        Ok(())
    }

    /// `gamma0_start, gamma0_start + step, ...` up to `gamma0_stop`.
    pub fn gamma0_grid(&self) -> Vec<f64> {
        let points = ((self.gamma0_stop - self.gamma0_start) / self.gamma0_step + 1e-9).floor() as usize + 1;
        (0..points)
            .map(|i| round12(self.gamma0_start + i as f64 * self.gamma0_step))
            .collect()
    }

    fn range(&self, k: u64, channels: &ChannelSet<f64>) -> Result<BlocklengthRange, mcaoi::Error> {
        let d = BlocklengthRange::default_for(k, channels);
        BlocklengthRange::new(self.n_min.unwrap_or(d.min), self.n_max.unwrap_or(d.max))
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// One cell group of a sweep row: the optimum of a single scheme.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Cell {
    pub aoi: Option<f64>,
    pub n: Option<u64>,
}

impl Cell {
    fn from(report: &Result<OptimumReport<f64>, mcaoi::Error>) -> Self {
        match report {
            Ok(r) => Cell {
                aoi: Some(r.avg_aoi),
                n: Some(r.n),
            },
            Err(_) => Cell::default(),
        }
    }
}

fn reason(parts: &[(&str, &Result<OptimumReport<f64>, mcaoi::Error>)]) -> String {
    parts
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EqualSnrRow {
    pub n_channels: usize,
    pub k: u64,
    pub snr: f64,
    pub sc: Cell,
    pub pd: Cell,
    pub mp: Cell,
    pub cs: Cell,
    pub ms: Cell,
    pub ms_splits: Option<Vec<u64>>,
    /// `CS <= MP <= PD`; empty when a value is missing.
    pub ordering_ok: Option<bool>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoChannelRow {
    pub snr0: f64,
    pub snr1: f64,
    pub k: u64,
    pub sc0: Cell,
    pub pd: Cell,
    pub mp: Cell,
    pub cs: Cell,
    pub ms: Cell,
    pub ms_splits: Option<Vec<u64>>,
    pub mp_shifts: Option<Vec<f64>>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThreeChannelRow {
    pub snr0: f64,
    pub snr1: f64,
    pub snr2: f64,
    pub k: u64,
    pub kkt: Cell,
    pub capacity: Cell,
    pub sc0: Cell,
    pub kkt_splits: Option<Vec<u64>>,
    pub capacity_splits: Option<Vec<u64>>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Rows {
    EqualSnr(Vec<EqualSnrRow>),
    TwoChannel(Vec<TwoChannelRow>),
    ThreeChannel(Vec<ThreeChannelRow>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::EqualSnr(r) => r.len(),
            Rows::TwoChannel(r) => r.len(),
            Rows::ThreeChannel(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn channel_set(snrs: Vec<f64>) -> Result<ChannelSet<f64>, mcaoi::Error> {
    ChannelSet::new(snrs)
}

fn mp_spec(spec: &SweepSpec) -> SchemeSpec {
    SchemeSpec::Mp {
        shifts: spec.shifts.into(),
        search: ShiftSearch::Auto,
    }
}

fn equal_snr_row(spec: &SweepSpec, n_channels: usize, k: u64, snr: f64) -> EqualSnrRow {
    let row = |reason: String| EqualSnrRow {
        n_channels,
        k,
        snr,
        sc: Cell::default(),
        pd: Cell::default(),
        mp: Cell::default(),
        cs: Cell::default(),
        ms: Cell::default(),
        ms_splits: None,
        ordering_ok: None,
        reason,
    };
    let channels = match channel_set(vec![snr; n_channels]) {
        Ok(c) => c,
        Err(e) => return row(e.to_string()),
    };
    let range = match spec.range(k, &channels) {
        Ok(r) => r,
        Err(e) => return row(e.to_string()),
    };
    let sc = optimize_blocklength(SchemeSpec::Sc { channel: 0 }, k, &channels, range);
    let pd = optimize_blocklength(SchemeSpec::Pd, k, &channels, range);
    let mp = optimize_blocklength(mp_spec(spec), k, &channels, range);
    let cs = optimize_blocklength(SchemeSpec::Cs, k, &channels, range);
    let ms = optimize_ms(k, &channels, range);
    let ordering_ok = match (&cs, &mp, &pd) {
        (Ok(c), Ok(m), Ok(p)) => Some(c.avg_aoi <= m.avg_aoi && m.avg_aoi <= p.avg_aoi),
        _ => None,
    };
    EqualSnrRow {
        ms_splits: ms.as_ref().ok().and_then(|r| r.splits.clone()),
        ordering_ok,
        reason: reason(&[("sc", &sc), ("pd", &pd), ("mp", &mp), ("cs", &cs), ("ms", &ms)]),
        sc: Cell::from(&sc),
        pd: Cell::from(&pd),
        mp: Cell::from(&mp),
        cs: Cell::from(&cs),
        ms: Cell::from(&ms),
        ..row(String::new())
    }
}

fn two_channel_row(spec: &SweepSpec, k: u64, g0: f64) -> TwoChannelRow {
    let g1 = round12(spec.sum_snr - g0);
    let mut row = TwoChannelRow {
        snr0: g0,
        snr1: g1,
        k,
        sc0: Cell::default(),
        pd: Cell::default(),
        mp: Cell::default(),
        cs: Cell::default(),
        ms: Cell::default(),
        ms_splits: None,
        mp_shifts: None,
        reason: String::new(),
    };
    let setup = channel_set(vec![g0, g1]).and_then(|c| spec.range(k, &c).map(|r| (c, r)));
    let (channels, range) = match setup {
        Ok(v) => v,
        Err(e) => {
            row.reason = e.to_string();
            return row;
        }
    };
    let sc = optimize_blocklength(SchemeSpec::Sc { channel: 0 }, k, &channels, range);
    let pd = optimize_blocklength(SchemeSpec::Pd, k, &channels, range);
    let mp = optimize_blocklength(mp_spec(spec), k, &channels, range);
    let cs = optimize_blocklength(SchemeSpec::Cs, k, &channels, range);
    let ms = optimize_ms(k, &channels, range);
    row.ms_splits = ms.as_ref().ok().and_then(|r| r.splits.clone());
    row.mp_shifts = mp.as_ref().ok().and_then(|r| r.shifts.clone());
    row.reason = reason(&[("sc0", &sc), ("pd", &pd), ("mp", &mp), ("cs", &cs), ("ms", &ms)]);
    row.sc0 = Cell::from(&sc);
    row.pd = Cell::from(&pd);
    row.mp = Cell::from(&mp);
    row.cs = Cell::from(&cs);
    row.ms = Cell::from(&ms);
    row
}

fn three_channel_row(spec: &SweepSpec, k: u64, g0: f64) -> ThreeChannelRow {
    let g1 = round12(spec.sum_snr - g0);
    let mut row = ThreeChannelRow {
        snr0: g0,
        snr1: g1,
        snr2: spec.fixed_snr,
        k,
        kkt: Cell::default(),
        capacity: Cell::default(),
        sc0: Cell::default(),
        kkt_splits: None,
        capacity_splits: None,
        reason: String::new(),
    };
    let setup = channel_set(vec![g0, g1, spec.fixed_snr]).and_then(|c| spec.range(k, &c).map(|r| (c, r)));
    let (channels, range) = match setup {
        Ok(v) => v,
        Err(e) => {
            row.reason = e.to_string();
            return row;
        }
    };
    let kkt = optimize_ms(k, &channels, range);
    let proportional: Vec<u64> = capacity_proportional_split(k, &channels)
        .splits
        .iter()
        .map(|&s| s as u64)
        .collect();
    let capacity = optimize_ms_fixed(&proportional, &channels, range);
    let sc = optimize_blocklength(SchemeSpec::Sc { channel: 0 }, k, &channels, range);
    row.kkt_splits = kkt.as_ref().ok().and_then(|r| r.splits.clone());
    row.capacity_splits = Some(proportional);
    row.reason = reason(&[("kkt", &kkt), ("capacity", &capacity), ("sc0", &sc)]);
    row.kkt = Cell::from(&kkt);
    row.capacity = Cell::from(&capacity);
    row.sc0 = Cell::from(&sc);
    row
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Rows, CliError> {
    spec.validate()?;
    Ok(match spec.kind {
        SweepKind::EqualSnr => {
            let grid: Vec<(usize, u64, f64)> = spec
                .channels
                .iter()
                .flat_map(|&n| spec.k.iter().flat_map(move |&k| spec.snr.iter().map(move |&g| (n, k, g))))
                .collect();
            Rows::EqualSnr(grid.par_iter().map(|&(n, k, g)| equal_snr_row(spec, n, k, g)).collect())
        }
        SweepKind::TwoChannel => {
            let grid: Vec<(u64, f64)> = spec
                .k
                .iter()
                .flat_map(|&k| spec.gamma0_grid().into_iter().map(move |g| (k, g)))
                .collect();
            Rows::TwoChannel(grid.par_iter().map(|&(k, g)| two_channel_row(spec, k, g)).collect())
        }
        SweepKind::ThreeChannelSplit => {
            let grid: Vec<(u64, f64)> = spec
                .k
                .iter()
                .flat_map(|&k| spec.gamma0_grid().into_iter().map(move |g| (k, g)))
                .collect();
            Rows::ThreeChannel(grid.par_iter().map(|&(k, g)| three_channel_row(spec, k, g)).collect())
        }
    })
}

pub const EQUAL_SNR_COLUMNS: [&str; 16] = [
    "n_channels", "k", "snr", "aoi_sc", "aoi_pd", "aoi_mp", "aoi_cs", "aoi_ms", "n_sc", "n_pd", "n_mp", "n_cs",
    "n_ms", "ms_splits", "ordering_ok", "reason",
];
pub const TWO_CHANNEL_COLUMNS: [&str; 16] = [
    "snr0", "snr1", "k", "aoi_sc0", "aoi_pd", "aoi_mp", "aoi_cs", "aoi_ms", "n_sc0", "n_pd", "n_mp", "n_cs", "n_ms",
    "ms_splits", "mp_shifts", "reason",
];
pub const THREE_CHANNEL_COLUMNS: [&str; 13] = [
    "snr0", "snr1", "snr2", "k", "aoi_kkt", "aoi_capacity", "aoi_sc0", "n_kkt", "n_capacity", "n_sc0", "kkt_splits",
    "capacity_splits", "reason",
];

fn opt_f(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_default()
}

fn opt_u(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_splits(v: &Option<Vec<u64>>) -> String {
    v.as_deref().map(join_u64).unwrap_or_default()
}

fn cells(cs: &[&Cell]) -> (Vec<String>, Vec<String>) {
    (cs.iter().map(|c| opt_f(c.aoi)).collect(), cs.iter().map(|c| opt_u(c.n)).collect())
}

pub fn write_csv<W: Write>(rows: &Rows, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    match rows {
        Rows::EqualSnr(rows) => {
            w.write_record(EQUAL_SNR_COLUMNS)?;
            for r in rows {
                let (aoi, n) = cells(&[&r.sc, &r.pd, &r.mp, &r.cs, &r.ms]);
                let mut rec = vec![r.n_channels.to_string(), r.k.to_string(), sig9(r.snr)];
                rec.extend(aoi);
                rec.extend(n);
                rec.push(opt_splits(&r.ms_splits));
                rec.push(r.ordering_ok.map(|b| b.to_string()).unwrap_or_default());
                rec.push(r.reason.clone());
                w.write_record(&rec)?;
            }
        }
        Rows::TwoChannel(rows) => {
            w.write_record(TWO_CHANNEL_COLUMNS)?;
            for r in rows {
                let (aoi, n) = cells(&[&r.sc0, &r.pd, &r.mp, &r.cs, &r.ms]);
                let mut rec = vec![sig9(r.snr0), sig9(r.snr1), r.k.to_string()];
                rec.extend(aoi);
                rec.extend(n);
                rec.push(opt_splits(&r.ms_splits));
                rec.push(r.mp_shifts.as_deref().map(join_f64).unwrap_or_default());
                rec.push(r.reason.clone());
                w.write_record(&rec)?;
            }
        }
        Rows::ThreeChannel(rows) => {
            w.write_record(THREE_CHANNEL_COLUMNS)?;
            for r in rows {
                let (aoi, n) = cells(&[&r.kkt, &r.capacity, &r.sc0]);
                let mut rec = vec![sig9(r.snr0), sig9(r.snr1), sig9(r.snr2), r.k.to_string()];
                rec.extend(aoi);
                rec.extend(n);
                rec.push(opt_splits(&r.kkt_splits));
                rec.push(opt_splits(&r.capacity_splits));
                rec.push(r.reason.clone());
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonSweep<'a> {
    spec: &'a SweepSpec,
    rows: &'a Rows,
}

pub fn write_json<W: Write>(spec: &SweepSpec, rows: &Rows, mut out: W) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, &JsonSweep { spec, rows })?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_grid_has_twenty_points() {
        let spec = SweepSpec::defaults(SweepKind::TwoChannel);
        let g = spec.gamma0_grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 2.0);
        assert_eq!(g[3], 2.3);
        assert_eq!(g[19], 3.9);
    }

    #[test]
    fn config_overlay_and_version() {
        let file: SweepConfigFile = serde_json::from_str(r#"{"version":1,"kind":"equal-snr","k":[8],"snr":[2]}"#).unwrap();
        let spec = SweepSpec::from_file(&file, None).unwrap();
        assert_eq!(spec.k, vec![8]);
        assert_eq!(spec.snr, vec![2.0]);
        assert_eq!(spec.channels, vec![2, 3, 4]);
        let old: SweepConfigFile = serde_json::from_str(r#"{"version":0,"kind":"equal-snr"}"#).unwrap();
        assert!(SweepSpec::from_file(&old, None).is_err());
        assert!(serde_json::from_str::<SweepConfigFile>(r#"{"version":1,"bogus":3}"#).is_err());
    }

    #[test]
    fn failures_leave_empty_cells_with_reason() {
        let mut spec = SweepSpec::defaults(SweepKind::EqualSnr);
        spec.channels = vec![2];
        spec.k = vec![16];
        spec.snr = vec![2.0];
        spec.n_min = Some(1);
        spec.n_max = Some(2);
        let Rows::EqualSnr(rows) = run_sweep(&spec).unwrap() else {
            panic!("wrong row kind")
        };
        let r = &rows[0];
        assert!(r.sc.aoi.is_none() && r.pd.aoi.is_none() && r.mp.aoi.is_none());
        assert!(r.ms.aoi.is_some());
        assert!(r.reason.contains("divergent"), "{}", r.reason);
        let mut buf = Vec::new();
        write_csv(&Rows::EqualSnr(rows), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("2,16,2,,,"));
    }
}
