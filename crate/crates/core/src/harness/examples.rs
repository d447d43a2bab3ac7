use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use super::{csv_err, write_text, ExperimentConfig};
use crate::error::Result;
use crate::learn::{fit_choice_multistart, fit_laplace, FitOptions, GpPrior, PosteriorSummary};
use crate::rng::substream;
use crate::stats::kendall_tau;
use crate::world::{
    format_choice_dataset, generate_choices, load_act_preferences, parse_act_preferences, sample_utility_with, ActGrid,
    ChoiceDataset, GroundTruthUtility, KernelConfig, Preference, PreferenceDataset,
};

/// The eight preferences of the butter example.
pub const EXAMPLE2_FIXTURE: &str = include_str!("../../fixtures/example2.txt");

/// Half-width multiplier of a 95% band.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct Example2Report {
    pub data: PreferenceDataset,
    pub posterior: PosteriorSummary,
    /// Preferences whose winner has the larger posterior mean.
    pub respected: usize,
    pub extended: PosteriorSummary,
    pub extended_data: PreferenceDataset,
    /// Grid-averaged width of the 95% band for the fixture fit.
    pub band_width: f64,
    pub extended_band_width: f64,
}

impl Example2Report {
    pub fn all_respected(&self) -> bool {
        self.respected == self.data.len()
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_prefs = {}", self.data.len());
        let _ = writeln!(s, "respected = {}", self.respected);
        let _ = writeln!(s, "all_respected = {}", self.all_respected());
        let _ = writeln!(s, "converged = {}", self.posterior.diagnostics.converged);
        let _ = writeln!(s, "band_width = {:.6}", self.band_width);
        let _ = writeln!(s, "extended_n_prefs = {}", self.extended_data.len());
        let _ = writeln!(s, "extended_band_width = {:.6}", self.extended_band_width);
        let _ = writeln!(s, "argmax_act = {}", self.posterior.grid.value(self.posterior.argmax_mean()));
        s
    }
}

fn respected(post: &PosteriorSummary, data: &PreferenceDataset) -> usize {
    data.pairs.iter().filter(|p| post.mean[p.winner] > post.mean[p.loser]).count()
}

fn band_width(post: &PosteriorSummary) -> f64 {
    let sd = post.std_devs();
    2.0 * Z95 * sd.iter().sum::<f64>() / sd.len() as f64
}

/// Writes `act, mean, sd, lo95, hi95` for external plotting.
pub fn write_band_csv(post: &PosteriorSummary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["act", "mean", "sd", "lo95", "hi95"]).map_err(csv_err)?;
    let sd = post.std_devs();
    for i in 0..post.len() {
        let (m, s) = (post.mean[i], sd[i]);
        w.write_record([
            post.grid.value(i).to_string(),
            m.to_string(),
            s.to_string(),
            (m - Z95 * s).to_string(),
            (m + Z95 * s).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Laplace fit of the fixture preferences, plus a fit on a larger dataset
/// whose extra pairs are answered by the first posterior mean (a utility
/// consistent with every fixture pair).
pub fn run_example2(cfg: &ExperimentConfig) -> Result<Example2Report> {
    let e = &cfg.example2;
    let grid = ActGrid::linspace(cfg.grid_lo, cfg.grid_hi, cfg.grid_points)?;
    let data = match &e.fixture {
        Some(p) => load_act_preferences(p, &grid)?,
        None => parse_act_preferences(EXAMPLE2_FIXTURE, &grid)?,
    };
    let kernel = KernelConfig::new(e.variance, e.lengthscale)?;
    let posterior = fit_laplace(&data, &kernel, e.sigma, &grid)?;

    let mut rng = substream(cfg.seed, 2);
    let mut pairs = data.pairs.clone();
    while pairs.len() < e.extended_prefs {
        let z = rng.random_range(0..grid.len());
        let y = rng.random_range(0..grid.len());
        if z == y || posterior.mean[z] == posterior.mean[y] {
            continue;
        }
        let (w, l) = if posterior.mean[z] > posterior.mean[y] { (z, y) } else { (y, z) };
        pairs.push(Preference::new(w, l)?);
    }
    let extended_data = PreferenceDataset::new(pairs);
    let extended = fit_laplace(&extended_data, &kernel, e.sigma, &grid)?;
    Ok(Example2Report {
        respected: respected(&posterior, &data),
        band_width: band_width(&posterior),
        extended_band_width: band_width(&extended),
        data,
        posterior,
        extended,
        extended_data,
    })
}

pub fn run_example2_to(cfg: &ExperimentConfig, out: &Path) -> Result<Example2Report> {
    let r = run_example2(cfg)?;
    std::fs::create_dir_all(out)?;
    write_band_csv(&r.posterior, &out.join("example2_band.csv"))?;
    write_band_csv(&r.extended, &out.join("example2_extended_band.csv"))?;
    r.posterior.save(out.join("example2_posterior.txt"))?;
    write_text(&out.join("example2_summary.txt"), &r.summary_text())?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example3Report {
    pub truth: GroundTruthUtility,
    pub data: ChoiceDataset,
    pub posteriors: Vec<PosteriorSummary>,
    /// `labels[k]` is the true utility matched to fitted utility `k`.
    pub labels: Vec<usize>,
    /// Kendall τ between each fitted mean and its matched true utility.
    pub taus: Vec<f64>,
}

impl Example3Report {
    pub fn min_tau(&self) -> f64 {
        self.taus.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_choices = {}", self.data.len());
        let _ = writeln!(s, "n_acts = {}", self.truth.grid().len());
        let _ = writeln!(s, "dims = {}", self.truth.dim());
        let incomparable = self.data.records.iter().filter(|r| r.chosen.len() > 1).count();
        let _ = writeln!(s, "multi_chosen = {incomparable}");
        for (k, (t, l)) in self.taus.iter().zip(&self.labels).enumerate() {
            let _ = writeln!(s, "tau.{} = {:.4}", k + 1, t);
            let _ = writeln!(s, "matched.{} = {}", k + 1, l + 1);
        }
        s
    }
}

/// Every permutation of `0..d` in lexicographic order.
fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Learns `dims` utilities from menus answered by the union of per-utility
/// argmaxes.
///
/// Union-argmax data cannot tell the utilities apart, so each fitted
/// utility is scored against the true one assigned by the permutation that
/// maximises the smallest τ.
pub fn run_example3(cfg: &ExperimentConfig) -> Result<Example3Report> {
    let e = &cfg.example3;
    let grid = ActGrid::linspace(cfg.grid_lo, cfg.grid_hi, e.n_acts)?;
    let kernel = KernelConfig::new(e.variance, e.lengthscale)?;
    let mut rng = substream(cfg.seed, 3);
    let truth = sample_utility_with(&kernel, &grid, e.dims, &mut rng)?;
    let data = generate_choices(&truth, e.menu_size, e.n_choices, &mut rng)?;
    let prior = GpPrior::new(&kernel, &grid)?;
    let opts = FitOptions { max_newton_iterations: 200, ..FitOptions::default() };
    let posteriors = fit_choice_multistart(&prior, &data, e.dims, e.sigma, &opts, e.n_starts, &mut rng)?;
    let mut tau = vec![vec![0.0; e.dims]; e.dims];
    for (k, p) in posteriors.iter().enumerate() {
        for (j, t) in tau[k].iter_mut().enumerate() {
            *t = kendall_tau(p.mean.as_slice(), truth.row(j))?;
        }
    }
    let score = |perm: &[usize]| perm.iter().enumerate().map(|(k, &j)| tau[k][j]).fold(f64::INFINITY, f64::min);
    let mut labels = (0..e.dims).collect::<Vec<_>>();
    for perm in permutations(e.dims) {
        if score(&perm) > score(&labels) {
            labels = perm;
        }
    }
    let taus = labels.iter().enumerate().map(|(k, &j)| tau[k][j]).collect();
    Ok(Example3Report { truth, data, posteriors, labels, taus })
}

pub fn run_example3_to(cfg: &ExperimentConfig, out: &Path) -> Result<Example3Report> {
    let r = run_example3(cfg)?;
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("example3_posterior.csv")).map_err(csv_err)?;
    let mut header = vec!["act".to_string()];
    for k in 1..=r.posteriors.len() {
        header.extend([format!("true{k}"), format!("mean{k}"), format!("sd{k}")]);
    }
    w.write_record(&header).map_err(csv_err)?;
    let sds: Vec<_> = r.posteriors.iter().map(|p| p.std_devs()).collect();
    for i in 0..r.truth.grid().len() {
        let mut rec = vec![r.truth.grid().value(i).to_string()];
        for ((p, sd), &label) in r.posteriors.iter().zip(&sds).zip(&r.labels) {
            let truth = r.truth.row(label)[i];
            rec.extend([truth.to_string(), p.mean[i].to_string(), sd[i].to_string()]);
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    write_text(&out.join("example3_choices.txt"), &format_choice_dataset(&r.data))?;
    write_text(&out.join("example3_summary.txt"), &r.summary_text())?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_are_complete_and_ordered() {
        assert_eq!(permutations(1), vec![vec![0]]);
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[5], vec![2, 1, 0]);
    }

    #[test]
    fn bundled_fixture_is_respected() {
        let r = run_example2(&ExperimentConfig::default()).unwrap();
        assert_eq!(r.data.len(), 8);
        assert!(r.all_respected());
        assert_eq!(r.extended_data.len(), 30);
    }
}
