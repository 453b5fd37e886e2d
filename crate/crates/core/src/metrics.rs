//! Population observers and CSV exporters: knowledge histograms over time,
//! mean knowledge quality, and per-actor snapshots.

use std::io::{self, Write};

use thiserror::Error;

use crate::engine::{Observer, World};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramRecord {
    pub sim_time: f64,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityRecord {
    pub sim_time: f64,
    pub mean_k: f64,
    pub mean_f_plus: f64,
    pub mean_f_minus: f64,
    pub mean_c: f64,
    pub mean_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub sim_time: f64,
    pub actor_id: usize,
    pub persona: String,
    pub k: f64,
    pub c: f64,
    pub p: f64,
    pub f: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub f_rumor: f64,
    pub initial_k: f64,
}

const BIN_EDGE_TOL: f64 = 1e-9;

/// Equal-width bins over `[0, 1]`; the last bin is closed on the right.
pub fn knowledge_histogram(world: &World, bins: usize) -> Vec<HistogramRecord> {
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    let lambda = world.params.lambda;
    let n = world.params.n();
    for a in &world.actors {
        let k = a.state.knowledge(lambda) / n;
        // bin edges are nominal; absorb rounding from the count arithmetic
        let idx = ((k * bins as f64 + BIN_EDGE_TOL).floor().max(0.0) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let t = world.sim_time();
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramRecord {
            sim_time: t,
            bin_lo: i as f64 / bins as f64,
            bin_hi: (i + 1) as f64 / bins as f64,
            count,
        })
        .collect()
}

/// Population means. Actors that know nothing contribute zero label fractions.
pub fn quality_summary(world: &World) -> QualityRecord {
    let m = world.actors.len().max(1) as f64;
    let mut acc = [0.0f64; 5];
    for a in &world.actors {
        let v = a.state.normalize(&world.params);
        acc[0] += v.k;
        acc[1] += v.labels.plus;
        acc[2] += v.labels.minus;
        acc[3] += v.c;
        acc[4] += v.p;
    }
    QualityRecord {
        sim_time: world.sim_time(),
        mean_k: acc[0] / m,
        mean_f_plus: acc[1] / m,
        mean_f_minus: acc[2] / m,
        mean_c: acc[3] / m,
        mean_p: acc[4] / m,
    }
}

pub fn snapshot(world: &World) -> Vec<SnapshotRecord> {
    let t = world.sim_time();
    world
        .actors
        .iter()
        .enumerate()
        .map(|(id, a)| {
            let v = a.state.normalize(&world.params);
            SnapshotRecord {
                sim_time: t,
                actor_id: id,
                persona: world.persona_name(a).to_owned(),
                k: v.k,
                c: v.c,
                p: v.p,
                f: v.f,
                f_plus: v.labels.plus,
                f_minus: v.labels.minus,
                f_rumor: v.labels.rumor,
                initial_k: a.initial_k,
            }
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, CorrelationError> {
    if xs.len() != ys.len() {
        return Err(CorrelationError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 2 {
        return Err(CorrelationError::TooShort(n));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Formats with at most 9 significant digits, trailing zeros dropped
/// (C's `%.9g`).
pub fn fmt_g9(x: f64) -> String {
    const SIG: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= SIG {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct Counting<W> {
    inner: W,
    bytes: usize,
}

impl<W: Write> Counting<W> {
    fn line(&mut self, fields: &[String]) -> io::Result<()> {
        let line = fields.join(",");
        self.inner.write_all(line.as_bytes())?;
        self.inner.write_all(b"\n")?;
        self.bytes += line.len() + 1;
        Ok(())
    }
}

pub const TIMESERIES_HEADER: &str = "sim_time,mean_k,mean_f_plus,mean_f_minus,mean_c,mean_p";
pub const HISTOGRAM_HEADER: &str = "sim_time,bin_lo,bin_hi,count";
pub const SNAPSHOT_HEADER: &str = "sim_time,actor_id,persona,k,c,p,f,f_plus,f_minus,f_rumor,initial_k";

fn header(h: &str) -> Vec<String> {
    vec![h.to_owned()]
}

pub fn write_timeseries<W: Write>(records: &[QualityRecord], sink: W) -> io::Result<usize> {
    let mut out = Counting { inner: sink, bytes: 0 };
    out.line(&header(TIMESERIES_HEADER))?;
    for r in records {
        out.line(&[r.sim_time, r.mean_k, r.mean_f_plus, r.mean_f_minus, r.mean_c, r.mean_p].map(fmt_g9))?;
    }
    out.inner.flush()?;
    Ok(out.bytes)
}

pub fn write_histograms<W: Write>(records: &[HistogramRecord], sink: W) -> io::Result<usize> {
    let mut out = Counting { inner: sink, bytes: 0 };
    out.line(&header(HISTOGRAM_HEADER))?;
    for r in records {
        out.line(&[fmt_g9(r.sim_time), fmt_g9(r.bin_lo), fmt_g9(r.bin_hi), r.count.to_string()])?;
    }
    out.inner.flush()?;
    Ok(out.bytes)
}

pub fn write_snapshot<W: Write>(records: &[SnapshotRecord], sink: W) -> io::Result<usize> {
    let mut out = Counting { inner: sink, bytes: 0 };
    out.line(&header(SNAPSHOT_HEADER))?;
    for r in records {
        out.line(&[
            fmt_g9(r.sim_time),
            r.actor_id.to_string(),
            r.persona.clone(),
            fmt_g9(r.k),
            fmt_g9(r.c),
            fmt_g9(r.p),
            fmt_g9(r.f),
            fmt_g9(r.f_plus),
            fmt_g9(r.f_minus),
            fmt_g9(r.f_rumor),
            fmt_g9(r.initial_k),
        ])?;
    }
    out.inner.flush()?;
    Ok(out.bytes)
}

/// Collects every metric in memory during a run.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub bins: usize,
    pub timeseries: Vec<QualityRecord>,
    pub histograms: Vec<HistogramRecord>,
    pub snapshots: Vec<(f64, Vec<SnapshotRecord>)>,
}

impl Recorder {
    pub fn new(bins: usize) -> Self {
        Recorder {
            bins,
            ..Recorder::default()
        }
    }
}

impl Observer for Recorder {
    fn on_sample(&mut self, world: &World) -> io::Result<()> {
        self.timeseries.push(quality_summary(world));
        self.histograms.extend(knowledge_histogram(world, self.bins));
        Ok(())
    }

    fn on_snapshot(&mut self, world: &World, time: f64) -> io::Result<()> {
        self.snapshots.push((time, snapshot(world)));
        Ok(())
    }
}
