use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::learn::Method;
use crate::world::{ActGrid, KernelConfig};

/// Settings shared by every experiment. Keys in the text form match the
/// field names, with `_min`/`_max` for ranges and dotted prefixes for the
/// per-experiment blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_sims: usize,
    pub n_prefs: usize,
    /// Noise of the simulated human.
    pub sigma: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub lengthscale_min: f64,
    pub lengthscale_max: f64,
    pub variance_min: f64,
    pub variance_max: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub example2: Example2Settings,
    pub example3: Example3Settings,
    pub honest: HonestSettings,
    pub shutdown: ShutdownSettings,
    pub oracle_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example2Settings {
    /// Preference file; the bundled eight pairs when unset.
    pub fixture: Option<PathBuf>,
    pub sigma: f64,
    pub lengthscale: f64,
    pub variance: f64,
    /// Total size of the generated extension.
    pub extended_prefs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example3Settings {
    pub n_choices: usize,
    pub n_acts: usize,
    pub menu_size: usize,
    pub dims: usize,
    pub sigma: f64,
    pub lengthscale: f64,
    pub variance: f64,
    /// Newton starts for the multimodal choice fit.
    pub n_starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HonestSettings {
    pub n_games: usize,
    pub n_acts: usize,
    pub n_menus: usize,
    /// Width of the human's indifference band.
    pub band: f64,
    pub epsilon: f64,
    pub flips: Vec<usize>,
    pub lengthscale: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShutdownSettings {
    pub n_acts: usize,
    pub k_max: usize,
    pub skewed_pairs: usize,
    pub shutdown_share: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_sims: 1000,
            n_prefs: 30,
            sigma: 1.0,
            grid_lo: 1.0,
            grid_hi: 9.0,
            grid_points: 200,
            lengthscale_min: 0.5,
            lengthscale_max: 3.0,
            variance_min: 0.5,
            variance_max: 2.0,
            methods: Method::ALL.to_vec(),
            seed: 0,
            out: PathBuf::from("results"),
            workers: 0,
            example2: Example2Settings {
                fixture: None,
                sigma: 0.1,
                lengthscale: 1.0,
                variance: 1.0,
                extended_prefs: 30,
            },
            example3: Example3Settings {
                n_choices: 100,
                n_acts: 60,
                menu_size: 2,
                dims: 2,
                sigma: 0.1,
                lengthscale: 1.0,
                variance: 1.0,
                n_starts: 16,
            },
            honest: HonestSettings {
                n_games: 200,
                n_acts: 50,
                n_menus: 30,
                band: 0.2,
                epsilon: 0.1,
                flips: vec![1, 5, 15],
                lengthscale: 1.0,
                variance: 1.0,
            },
            shutdown: ShutdownSettings { n_acts: 50, k_max: 100, skewed_pairs: 200, shutdown_share: 0.9 },
            oracle_samples: 1_000_000,
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn value<T: std::str::FromStr>(v: &str, line: usize) -> Result<T> {
    v.parse().map_err(|_| err(line, format!("bad value {v:?}")))
}

fn list<T: std::str::FromStr>(v: &str, line: usize) -> Result<Vec<T>> {
    v.split(',').map(|t| value(t.trim(), line)).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Small settings for smoke runs.
    pub fn quick(mut self) -> Self {
        self.n_sims = 50;
        self.grid_points = 40;
        self.honest.n_games = 40;
        self.oracle_samples = 100_000;
        self
    }

    pub fn grid(&self) -> Result<ActGrid> {
        ActGrid::linspace(self.grid_lo, self.grid_hi, self.grid_points)
    }

    pub fn kernel_ranges(&self) -> ((f64, f64), (f64, f64)) {
        ((self.lengthscale_min, self.lengthscale_max), (self.variance_min, self.variance_max))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| err(line, "expected `key = value`"))?;
            let v = v.trim();
            match k.trim() {
                "n_sims" => c.n_sims = value(v, line)?,
                "n_prefs" => c.n_prefs = value(v, line)?,
                "sigma" => c.sigma = value(v, line)?,
                "grid_lo" => c.grid_lo = value(v, line)?,
                "grid_hi" => c.grid_hi = value(v, line)?,
                "grid_points" => c.grid_points = value(v, line)?,
                "lengthscale_min" => c.lengthscale_min = value(v, line)?,
                "lengthscale_max" => c.lengthscale_max = value(v, line)?,
                "variance_min" => c.variance_min = value(v, line)?,
                "variance_max" => c.variance_max = value(v, line)?,
                "methods" => {
                    c.methods = v
                        .split(',')
                        .map(|t| t.trim().parse::<Method>().map_err(|e| err(line, e.to_string())))
                        .collect::<Result<_>>()?
                }
                "seed" => c.seed = value(v, line)?,
                "out" => c.out = PathBuf::from(v),
                "workers" => c.workers = value(v, line)?,
                "oracle_samples" => c.oracle_samples = value(v, line)?,
                "example2.fixture" => c.example2.fixture = Some(PathBuf::from(v)),
                "example2.sigma" => c.example2.sigma = value(v, line)?,
                "example2.lengthscale" => c.example2.lengthscale = value(v, line)?,
                "example2.variance" => c.example2.variance = value(v, line)?,
                "example2.extended_prefs" => c.example2.extended_prefs = value(v, line)?,
                "example3.n_choices" => c.example3.n_choices = value(v, line)?,
                "example3.n_acts" => c.example3.n_acts = value(v, line)?,
                "example3.menu_size" => c.example3.menu_size = value(v, line)?,
                "example3.dims" => c.example3.dims = value(v, line)?,
                "example3.sigma" => c.example3.sigma = value(v, line)?,
                "example3.lengthscale" => c.example3.lengthscale = value(v, line)?,
                "example3.variance" => c.example3.variance = value(v, line)?,
                "example3.n_starts" => c.example3.n_starts = value(v, line)?,
                "honest.n_games" => c.honest.n_games = value(v, line)?,
                "honest.n_acts" => c.honest.n_acts = value(v, line)?,
                "honest.n_menus" => c.honest.n_menus = value(v, line)?,
                "honest.band" => c.honest.band = value(v, line)?,
                "honest.epsilon" => c.honest.epsilon = value(v, line)?,
                "honest.flips" => c.honest.flips = list(v, line)?,
                "honest.lengthscale" => c.honest.lengthscale = value(v, line)?,
                "honest.variance" => c.honest.variance = value(v, line)?,
                "shutdown.n_acts" => c.shutdown.n_acts = value(v, line)?,
                "shutdown.k_max" => c.shutdown.k_max = value(v, line)?,
                "shutdown.skewed_pairs" => c.shutdown.skewed_pairs = value(v, line)?,
                "shutdown.shutdown_share" => c.shutdown.shutdown_share = value(v, line)?,
                other => return Err(err(line, format!("unknown key {other:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n_sims", self.n_sims.to_string());
        kv("n_prefs", self.n_prefs.to_string());
        kv("sigma", self.sigma.to_string());
        kv("grid_lo", self.grid_lo.to_string());
        kv("grid_hi", self.grid_hi.to_string());
        kv("grid_points", self.grid_points.to_string());
        kv("lengthscale_min", self.lengthscale_min.to_string());
        kv("lengthscale_max", self.lengthscale_max.to_string());
        kv("variance_min", self.variance_min.to_string());
        kv("variance_max", self.variance_max.to_string());
        kv("methods", join(&self.methods));
        kv("seed", self.seed.to_string());
        kv("out", self.out.display().to_string());
        kv("workers", self.workers.to_string());
        kv("oracle_samples", self.oracle_samples.to_string());
        if let Some(p) = &self.example2.fixture {
            kv("example2.fixture", p.display().to_string());
        }
        kv("example2.sigma", self.example2.sigma.to_string());
        kv("example2.lengthscale", self.example2.lengthscale.to_string());
        kv("example2.variance", self.example2.variance.to_string());
        kv("example2.extended_prefs", self.example2.extended_prefs.to_string());
        kv("example3.n_choices", self.example3.n_choices.to_string());
        kv("example3.n_acts", self.example3.n_acts.to_string());
        kv("example3.menu_size", self.example3.menu_size.to_string());
        kv("example3.dims", self.example3.dims.to_string());
        kv("example3.sigma", self.example3.sigma.to_string());
        kv("example3.lengthscale", self.example3.lengthscale.to_string());
        kv("example3.variance", self.example3.variance.to_string());
        kv("example3.n_starts", self.example3.n_starts.to_string());
        kv("honest.n_games", self.honest.n_games.to_string());
        kv("honest.n_acts", self.honest.n_acts.to_string());
        kv("honest.n_menus", self.honest.n_menus.to_string());
        kv("honest.band", self.honest.band.to_string());
        kv("honest.epsilon", self.honest.epsilon.to_string());
        kv("honest.flips", join(&self.honest.flips));
        kv("honest.lengthscale", self.honest.lengthscale.to_string());
        kv("honest.variance", self.honest.variance.to_string());
        kv("shutdown.n_acts", self.shutdown.n_acts.to_string());
        kv("shutdown.k_max", self.shutdown.k_max.to_string());
        kv("shutdown.skewed_pairs", self.shutdown.skewed_pairs.to_string());
        kv("shutdown.shutdown_share", self.shutdown.shutdown_share.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_sims == 0 {
            return bad("n_sims must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if self.grid_points < 2 || !(self.grid_lo < self.grid_hi) {
            return bad("grid needs at least two points and grid_lo < grid_hi".into());
        }
        let range_ok = |lo: f64, hi: f64| lo > 0.0 && lo <= hi && hi.is_finite();
        if !range_ok(self.lengthscale_min, self.lengthscale_max) {
            return bad("lengthscale range must satisfy 0 < min <= max".into());
        }
        if !range_ok(self.variance_min, self.variance_max) {
            return bad("variance range must satisfy 0 < min <= max".into());
        }
        if self.oracle_samples < crate::game::MIN_SAMPLES {
            return bad(format!("oracle_samples must be at least {}", crate::game::MIN_SAMPLES));
        }
        KernelConfig::new(self.example2.variance, self.example2.lengthscale)?;
        KernelConfig::new(self.example3.variance, self.example3.lengthscale)?;
        KernelConfig::new(self.honest.variance, self.honest.lengthscale)?;
        if !(self.example2.sigma > 0.0) || !(self.example3.sigma > 0.0) {
            return bad("example sigmas must be > 0".into());
        }
        let e3 = &self.example3;
        if e3.dims == 0 || e3.menu_size < 2 || e3.menu_size > e3.n_acts || e3.n_starts == 0 {
            return bad("example3 needs dims >= 1, 2 <= menu_size <= n_acts and n_starts >= 1".into());
        }
        let h = &self.honest;
        if h.n_games == 0 || h.n_acts < 2 || !(h.band > 0.0) || !(h.epsilon > 0.0 && h.epsilon <= h.band) {
            return bad("honest needs games, two acts, band > 0 and epsilon in (0, band]".into());
        }
        let s = &self.shutdown;
        if s.n_acts < 2 || s.n_acts > 1000 || s.k_max == 0 || !(0.0..=1.0).contains(&s.shutdown_share) {
            return bad("shutdown needs 2..=1000 acts, k_max >= 1 and a share in [0, 1]".into());
        }
        Ok(())
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    ExperimentConfig::from_text(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ExperimentConfig::from_text("# nothing\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig { methods: vec![Method::Ep, Method::Map], ..ExperimentConfig::default() };
        c.example2.fixture = Some(PathBuf::from("prefs.txt"));
        c.honest.flips = vec![2, 4];
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_zero_sims_and_unknown_keys() {
        assert!(matches!(ExperimentConfig::from_text("n_sims = 0"), Err(Error::InvalidArgument(_))));
        let e = ExperimentConfig::from_text("seed = 1\nfoo = 2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }
}
