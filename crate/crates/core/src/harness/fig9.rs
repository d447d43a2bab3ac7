use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use super::{pool, write_text};
use crate::error::Result;
use crate::game::{decide, expected_payoffs_probit, select_act, AcquisitionKind, Action, Decision, ExpectedPayoffs};
use crate::learn::{
    fit_ep_with_prior, fit_laplace_with_prior, fit_map_with_prior, marginal_pair, FitOptions, GpPrior, Method,
};
use crate::rng::substream;
use crate::world::{generate_preferences, sample_utility_with, HumanConfig, KernelConfig};

use super::ExperimentConfig;

/// One simulation under one method.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig9Row {
    pub sim: usize,
    pub lengthscale: f64,
    pub variance: f64,
    pub n_prefs: usize,
    pub method: Method,
    pub x: usize,
    pub o: usize,
    pub outcome: std::result::Result<(Decision, ExpectedPayoffs, bool), String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MethodSummary {
    pub imm: usize,
    pub def: usize,
    pub don: usize,
    pub failures: usize,
}

impl MethodSummary {
    pub fn decided(&self) -> usize {
        self.imm + self.def + self.don
    }

    pub fn pct(&self, action: Action) -> f64 {
        let count = match action {
            Action::Imm => self.imm,
            Action::Def => self.def,
            Action::DoN => self.don,
        };
        100.0 * count as f64 / self.decided().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig9Report {
    pub rows: Vec<Fig9Row>,
    pub summary: Vec<(Method, MethodSummary)>,
}

impl Fig9Report {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|(k, _)| *k == m).map(|(_, s)| s)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for (m, sum) in &self.summary {
            let key = m.name().to_ascii_lowercase();
            let _ = writeln!(s, "{key}.imm_pct = {:.2}", sum.pct(Action::Imm));
            let _ = writeln!(s, "{key}.def_pct = {:.2}", sum.pct(Action::Def));
            let _ = writeln!(s, "{key}.don_pct = {:.2}", sum.pct(Action::DoN));
            let _ = writeln!(s, "{key}.decided = {}", sum.decided());
            let _ = writeln!(s, "{key}.failures = {}", sum.failures);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(super::csv_err)?;
        w.write_record([
            "sim",
            "lengthscale",
            "variance",
            "n_prefs",
            "method",
            "x",
            "o",
            "action",
            "tie",
            "def",
            "imm",
            "don",
            "def_margin",
            "converged",
            "error",
        ])
        .map_err(super::csv_err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.sim.to_string(),
                r.lengthscale.to_string(),
                r.variance.to_string(),
                r.n_prefs.to_string(),
                r.method.to_string(),
                r.x.to_string(),
                r.o.to_string(),
            ];
            match &r.outcome {
                Ok((d, p, converged)) => rec.extend([
                    d.action.to_string(),
                    d.tie.to_string(),
                    p.def_scalar().unwrap_or(f64::NAN).to_string(),
                    p.imm_value.to_string(),
                    p.don_value.to_string(),
                    p.def_margin().to_string(),
                    converged.to_string(),
                    String::new(),
                ]),
                Err(e) => rec.extend([
                    "error".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.clone(),
                ]),
            }
            w.write_record(&rec).map_err(super::csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn play(
    prior: &GpPrior,
    method: Method,
    data: &crate::world::PreferenceDataset,
    sigma: f64,
    o: usize,
) -> Result<(usize, Decision, ExpectedPayoffs, bool)> {
    let opts = FitOptions::default();
    let post = match method {
        Method::Map => fit_map_with_prior(prior, data, sigma, &opts)?,
        Method::Laplace => fit_laplace_with_prior(prior, data, sigma, &opts)?,
        Method::Ep => fit_ep_with_prior(prior, data, sigma, &opts)?,
    };
    let x = select_act(&post, o, sigma, AcquisitionKind::Collaborative)?;
    let p = expected_payoffs_probit(&marginal_pair(&post, x, o)?, sigma);
    Ok((x, decide(&p)?, p, post.diagnostics.converged))
}

fn simulate(cfg: &ExperimentConfig, sim: usize) -> Result<Vec<Fig9Row>> {
    let grid = cfg.grid()?;
    let mut rng = substream(cfg.seed, sim as u64);
    let ((l_lo, l_hi), (v_lo, v_hi)) = cfg.kernel_ranges();
    let lengthscale = rng.random_range(l_lo..=l_hi);
    let variance = rng.random_range(v_lo..=v_hi);
    let kernel = KernelConfig::new(variance, lengthscale)?;
    let nu = sample_utility_with(&kernel, &grid, 1, &mut rng)?;
    let data = generate_preferences(&nu, &HumanConfig::probit(cfg.sigma)?, cfg.n_prefs, &mut rng)?;
    let o = rng.random_range(0..grid.len());
    let prior = GpPrior::new(&kernel, &grid)?;
    Ok(cfg
        .methods
        .iter()
        .map(|&method| {
            let (x, outcome) = match play(&prior, method, &data, cfg.sigma, o) {
                Ok((x, d, p, conv)) => (x, Ok((d, p, conv))),
                Err(e) => (o, Err(e.to_string())),
            };
            Fig9Row { sim, lengthscale, variance, n_prefs: data.len(), method, x, o, outcome }
        })
        .collect())
}

/// Share of IMM, DEF and DoN decisions per approximation over
/// `cfg.n_sims` simulated games.
///
/// Each simulation draws kernel hyperparameters and a utility, generates
/// noisy preferences, fits every method on the same data and lets the
/// robot propose against a random status quo. A failed fit is recorded in
/// its row and counted; it does not stop the run.
pub fn run_fig9(cfg: &ExperimentConfig) -> Result<Fig9Report> {
    cfg.validate()?;
    let sims: Vec<Result<Vec<Fig9Row>>> =
        pool(cfg.workers)?.install(|| (0..cfg.n_sims).into_par_iter().map(|i| simulate(cfg, i)).collect());
    let mut rows = Vec::with_capacity(cfg.n_sims * cfg.methods.len());
    for s in sims {
        rows.extend(s?);
    }
    let summary = cfg
        .methods
        .iter()
        .map(|&m| {
            let mut s = MethodSummary::default();
            for r in rows.iter().filter(|r| r.method == m) {
                match &r.outcome {
                    Ok((d, _, _)) => match d.action {
                        Action::Imm => s.imm += 1,
                        Action::Def => s.def += 1,
                        Action::DoN => s.don += 1,
                    },
                    Err(_) => s.failures += 1,
                }
            }
            (m, s)
        })
        .collect();
    Ok(Fig9Report { rows, summary })
}

/// Runs the experiment and writes `fig9.csv` and `fig9_summary.txt`.
pub fn run_fig9_to(cfg: &ExperimentConfig, out: &Path) -> Result<Fig9Report> {
    let report = run_fig9(cfg)?;
    std::fs::create_dir_all(out)?;
    report.write_csv(&out.join("fig9.csv"))?;
    write_text(&out.join("fig9_summary.txt"), &report.summary_text())?;
    Ok(report)
}
