//! `key = value` text form of a posterior summary. Covariance rows follow
//! as repeated `cov = …` lines in row order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{Diagnostics, Method, PosteriorSummary};
use crate::error::{Error, Result};
use crate::world::{ActGrid, KernelConfig};

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn floats(value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(line, format!("bad number {t:?}"))))
        .collect()
}

fn scalar<T: std::str::FromStr>(value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| parse_err(line, format!("bad value {value:?}")))
}

impl PosteriorSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method = {}", self.method);
        let _ = writeln!(out, "sigma_model = {}", self.sigma_model);
        let _ = writeln!(out, "kernel.variance = {}", self.kernel.variance);
        let _ = writeln!(out, "kernel.lengthscale = {}", self.kernel.lengthscale);
        let _ = writeln!(out, "kernel.mean = {}", self.kernel.mean);
        let _ = writeln!(out, "kernel.jitter = {}", self.kernel.jitter);
        let _ = writeln!(out, "iterations = {}", self.diagnostics.iterations);
        let _ = writeln!(out, "grad_norm = {}", self.diagnostics.grad_norm);
        let _ = writeln!(out, "converged = {}", self.diagnostics.converged);
        let _ = writeln!(out, "grid = {}", join(self.grid.points().iter().copied()));
        let _ = writeln!(out, "mean = {}", join(self.mean.iter().copied()));
        for r in 0..self.cov.nrows() {
            let _ = writeln!(out, "cov = {}", join(self.cov.row(r).iter().copied()));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut method = None;
        let mut sigma_model = None;
        let mut kernel = KernelConfig::default();
        let mut diagnostics = Diagnostics::default();
        let mut grid = None;
        let mut mean = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| parse_err(line, "expected `key = value`"))?;
            let value = value.trim();
            match key.trim() {
                "method" => method = Some(value.parse::<Method>().map_err(|e| parse_err(line, e.to_string()))?),
                "sigma_model" => sigma_model = Some(scalar::<f64>(value, line)?),
                "kernel.variance" => kernel.variance = scalar(value, line)?,
                "kernel.lengthscale" => kernel.lengthscale = scalar(value, line)?,
                "kernel.mean" => kernel.mean = scalar(value, line)?,
                "kernel.jitter" => kernel.jitter = scalar(value, line)?,
                "iterations" => diagnostics.iterations = scalar(value, line)?,
                "grad_norm" => diagnostics.grad_norm = scalar(value, line)?,
                "converged" => diagnostics.converged = scalar(value, line)?,
                "grid" => {
                    let pts = floats(value, line)?;
                    grid = Some(ActGrid::new(pts).map_err(|e| parse_err(line, e.to_string()))?);
                }
                "mean" => mean = Some(floats(value, line)?),
                "cov" => rows.push(floats(value, line)?),
                other => return Err(parse_err(line, format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| parse_err(0, format!("missing key {k:?}"));
        let grid = grid.ok_or_else(|| missing("grid"))?;
        let mean = mean.ok_or_else(|| missing("mean"))?;
        let n = grid.len();
        if mean.len() != n || rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(parse_err(0, format!("mean and cov must match the {n}-point grid")));
        }
        kernel.validate()?;
        Ok(PosteriorSummary {
            method: method.ok_or_else(|| missing("method"))?,
            grid,
            mean: DVector::from_vec(mean),
            cov: DMatrix::from_row_iterator(n, n, rows.into_iter().flatten()),
            kernel,
            sigma_model: sigma_model.ok_or_else(|| missing("sigma_model"))?,
            diagnostics,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}
