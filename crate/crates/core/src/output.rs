//! Deterministic CSV artifacts.
//!
//! Every file starts with `#` comment lines carrying the version and the
//! resolved configuration, followed by an RFC-4180 table with LF line ends. Floats use Rust's
//! shortest round-trip exponent form, so equal inputs give equal bytes.
//! Wall-clock measurements never go into these tables; they have their own
//! timing file so the rest stays reproducible.

use std::fmt::Display;
use std::path::Path;

use crate::analysis::{ConvergenceRow, ResolutionRow, Spectrum};
use crate::error::{Error, Result};
use crate::flow::FlowRun;

/// Ordered `key=value` pairs written as header comments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Display) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn render(&self) -> String {
        let mut s = format!("# version={}\n", crate::version());
        for (k, v) in &self.entries {
            // a newline in a value would end the comment
            s.push_str(&format!("# {k}={}\n", v.replace(['\n', '\r'], " ")));
        }
        s
    }
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Header comments followed by the table.
pub fn csv<I, R>(header: &Header, columns: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = ::csv::WriterBuilder::new().terminator(::csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let render_err = |e: ::csv::Error| Error::InvalidArgument(format!("csv rendering: {e}"));
    w.write_record(columns).map_err(render_err)?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        if row.len() != columns.len() {
            return Err(Error::InvalidArgument(format!("row has {} fields, expected {}", row.len(), columns.len())));
        }
        w.write_record(&row).map_err(render_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv rendering: {e}")))?;
    let mut out = header.render();
    out.push_str(std::str::from_utf8(&body).expect("csv output is UTF-8"));
    Ok(out)
}

pub fn write(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn convergence_csv(header: &Header, rows: &[ConvergenceRow]) -> Result<String> {
    csv(
        header,
        &["mode", "min_depth", "normalized_residual"],
        rows.iter().map(|r| [r.mode.to_string(), r.min_depth.to_string(), num(r.normalized_residual)]),
    )
}

/// One row per recorded state. `rms` is blank without a ground truth.
pub fn flow_metrics_csv(header: &Header, run: &FlowRun) -> Result<String> {
    csv(
        header,
        &["step", "time", "rms", "rms_per_vertex", "sphericity", "centroid_drift"],
        run.metrics.iter().map(|r| {
            [r.step.to_string(), num(r.time), opt(r.rms), opt(r.rms_per_vertex), num(r.sphericity), num(r.centroid_drift)]
        }),
    )
}

pub fn flow_timing_csv(header: &Header, run: &FlowRun) -> Result<String> {
    csv(
        header,
        &["step", "solve_seconds"],
        run.solve_seconds.iter().enumerate().map(|(i, s)| [(i + 1).to_string(), num(*s)]),
    )
}

/// `(label, index, eigenvalue)` rows with 1-based indices; `label` names the
/// column that distinguishes the spectra (depth, rotation, ...).
pub fn spectra_csv<'a>(header: &Header, label: &str, spectra: impl IntoIterator<Item = (String, &'a Spectrum)>) -> Result<String> {
    let rows: Vec<[String; 3]> = spectra
        .into_iter()
        .flat_map(|(key, s)| s.eigenvalues.iter().enumerate().map(move |(i, v)| [key.clone(), (i + 1).to_string(), num(*v)]))
        .collect();
    csv(header, &[label, "index", "eigenvalue"], rows)
}

pub fn deviation_csv(header: &Header, rows: &[ResolutionRow]) -> Result<String> {
    csv(header, &["depth", "deviation"], rows.iter().map(|r| [r.depth.to_string(), num(r.deviation)]))
}
