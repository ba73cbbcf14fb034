//! Uniformly sampled multi-channel time series and its CSV form.

use std::io;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("time grids differ: {0}")]
    GridMismatch(String),
    #[error("no channel named `{0}`")]
    UnknownChannel(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed waveform csv: {0}")]
    Malformed(String),
}

/// Samples at `t0 + i*dt`, one column per named channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub t0: f64,
    pub dt: f64,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn new(t0: f64, dt: f64, names: Vec<String>) -> Self {
        let columns = vec![Vec::new(); names.len()];
        Self { t0, dt, names, columns }
    }

    pub fn from_columns(t0: f64, dt: f64, columns: Vec<(String, Vec<f64>)>) -> Self {
        let len = columns.first().map_or(0, |c| c.1.len());
        assert!(columns.iter().all(|c| c.1.len() == len), "ragged columns");
        let (names, columns) = columns.into_iter().unzip();
        Self { t0, dt, names, columns }
    }

    /// Append one row, in channel order.
    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len());
        for (c, x) in self.columns.iter_mut().zip(row) {
            c.push(*x);
        }
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64], WaveformError> {
        self.channel(name)
            .ok_or_else(|| WaveformError::UnknownChannel(name.into()))
    }

    /// Single-channel copy.
    pub fn select(&self, name: &str) -> Result<Waveform, WaveformError> {
        let col = self.require(name)?.to_vec();
        Ok(Waveform::from_columns(self.t0, self.dt, vec![(name.to_string(), col)]))
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.channel(name).and_then(|c| c.last().copied())
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), WaveformError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.names.iter().cloned());
        out.write_record(&header)?;
        let mut row = Vec::with_capacity(self.names.len() + 1);
        for i in 0..self.len() {
            row.clear();
            row.push(format!("{:.12e}", self.time(i)));
            row.extend(self.columns.iter().map(|c| format!("{:.12e}", c[i])));
            out.write_record(&row)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    /// Read a CSV written by [`write_csv`](Self::write_csv). `dt` is taken
    /// from the first two rows; the time column must be uniform to within
    /// the printed precision.
    pub fn read_csv<R: io::Read>(r: R) -> Result<Self, WaveformError> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(WaveformError::Malformed("first column must be `t`".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut times = Vec::new();
        let mut columns = vec![Vec::new(); names.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| WaveformError::Malformed(format!("bad number `{s}`")))
            };
            times.push(parse(&rec[0])?);
            for (c, field) in columns.iter_mut().zip(rec.iter().skip(1)) {
                c.push(parse(field)?);
            }
        }
        let t0 = times.first().copied().unwrap_or(0.0);
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        for (i, t) in times.iter().enumerate() {
            let expected = t0 + i as f64 * dt;
            if (t - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(WaveformError::Malformed(format!("non-uniform time at row {}", i + 1)));
            }
        }
        Ok(Self::from_columns(t0, dt, names.into_iter().zip(columns).collect()))
    }
}

/// Guard used in place of tiny reference magnitudes.
pub const REL_ERROR_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RelativeError {
    pub values: Vec<f64>,
    /// Sample indices where `|ref|` fell below the guard.
    pub guarded: Vec<usize>,
}

impl RelativeError {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

fn same_grid(a: &Waveform, b: &Waveform) -> Result<(), WaveformError> {
    // tolerance covers grids recovered from 13-digit csv text
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-300);
    if !(close(a.t0, b.t0) || a.t0 == b.t0) || !close(a.dt, b.dt) || a.len() != b.len() {
        return Err(WaveformError::GridMismatch(format!(
            "(t0={}, dt={}, n={}) vs (t0={}, dt={}, n={})",
            a.t0,
            a.dt,
            a.len(),
            b.t0,
            b.dt,
            b.len()
        )));
    }
    Ok(())
}

/// `|w - ref| / max(|ref|, 1e-12)` per sample, with guard activations listed.
pub fn relative_error(w: &Waveform, reference: &Waveform, channel: &str) -> Result<RelativeError, WaveformError> {
    same_grid(w, reference)?;
    let a = w.require(channel)?;
    let b = reference.require(channel)?;
    let mut guarded = Vec::new();
    let values = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, r))| {
            let denom = if r.abs() < REL_ERROR_GUARD {
                guarded.push(i);
                REL_ERROR_GUARD
            } else {
                r.abs()
            };
            (x - r).abs() / denom
        })
        .collect();
    Ok(RelativeError { values, guarded })
}
