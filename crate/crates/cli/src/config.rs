//! Experiment configuration files.
//!
//! A config is a TOML document with the sections `[run]`, `[model]`,
//! `[sizes]`, `[caps]` and `[verify]`. Every section and key is optional;
//! unknown keys are rejected. Values are validated in full before any
//! sampling starts.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use lrp_core::{KernelFamily, KernelSpec};
use serde::{Deserialize, Serialize};

/// Environment variable consulted for the output directory when neither
/// `--out` nor `run.output_dir` is given.
pub const OUTPUT_DIR_ENV: &str = "LRP_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "lrp-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Full,
    Smoke,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 0,
            output_dir: None,
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    pub family: KernelFamily,
    pub beta: f64,
    /// β grid for `theta-vs-beta`.
    pub betas: Vec<f64>,
    /// Second kernel for `compare-kernels`.
    pub compare_family: KernelFamily,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            d: 1,
            family: KernelFamily::ExactCube,
            beta: 1.0,
            betas: vec![1.0, 4.0, 16.0],
            compare_family: KernelFamily::TruncatedPower,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizesSection {
    pub n: usize,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// Second factor for `submult` (`Λ(m n)` against `Λ(m) Λ(n)`).
    pub m: usize,
    /// Sphere radius, or the largest connected-set size.
    pub k: u64,
    /// Position inspected by `cutpoints`.
    pub w: usize,
    pub order: u32,
    pub halo: usize,
    pub epsilon: f64,
    /// `[fine, coarse]` for `coupling-check`.
    pub scales: Vec<usize>,
    /// Distance exponent used to normalise `tail`; estimated on `n_grid`
    /// when absent.
    pub theta: Option<f64>,
    /// Use double sweeps (a lower bound) instead of exact diameters.
    pub diameter_sweeps: Option<usize>,
}

impl Default for SizesSection {
    fn default() -> Self {
        Self {
            n: 32,
            n_grid: vec![8, 16, 32, 64, 128],
            replicates: 1000,
            m: 4,
            k: 4,
            w: 3,
            order: 2,
            halo: 2,
            epsilon: 1.0 / 64.0,
            scales: vec![16, 8],
            theta: None,
            diameter_sweeps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapsSection {
    pub diameter_exact: usize,
    pub enumeration: usize,
    pub memory_bytes: u64,
}

impl Default for CapsSection {
    fn default() -> Self {
        Self {
            diameter_exact: lrp_core::graph::DEFAULT_DIAMETER_CAP,
            enumeration: lrp_core::oracle::DEFAULT_ENUMERATION_CAP,
            memory_bytes: lrp_core::sampler::DEFAULT_MEMORY_BYTES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub scale: Scale,
    /// Criteria to run; empty means all.
    pub criteria: Vec<u32>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            scale: Scale::Full,
            criteria: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub model: ModelSection,
    pub sizes: SizesSection,
    pub caps: CapsSection,
    pub verify: VerifySection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid configuration")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        Ok(KernelSpec::new(self.model.family, self.model.beta)?)
    }

    /// Output directory: the configured one, else the environment variable,
    /// else [`DEFAULT_OUTPUT_DIR`].
    pub fn resolve_output_dir(&mut self) {
        if self.run.output_dir.is_none() {
            let dir = std::env::var_os(OUTPUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
            self.run.output_dir = Some(dir);
        }
    }

    /// Checks that every field is usable. Subcommand-specific requirements
    /// are checked by [`ExperimentConfig::validate_for`].
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        ensure!((1..=8).contains(&m.d), "model.d must be in 1..=8, got {}", m.d);
        check_beta("model.beta", m.beta)?;
        for &b in &m.betas {
            check_beta("model.betas", b)?;
        }
        let s = &self.sizes;
        ensure!(s.n >= 2, "sizes.n must be >= 2, got {}", s.n);
        ensure!(s.n_grid.iter().all(|&n| n >= 2), "sizes.n_grid entries must be >= 2");
        let mut grid = s.n_grid.clone();
        grid.sort_unstable();
        grid.dedup();
        ensure!(grid.len() == s.n_grid.len(), "sizes.n_grid has repeated entries");
        ensure!(s.replicates >= 2, "sizes.replicates must be >= 2, got {}", s.replicates);
        ensure!(s.replicates < 1 << 32, "sizes.replicates must be < 2^32");
        ensure!(s.n < 1 << 24 && s.n_grid.iter().all(|&n| n < 1 << 24), "box sides must be < 2^24");
        ensure!(s.m >= 2, "sizes.m must be >= 2, got {}", s.m);
        ensure!(s.k >= 2, "sizes.k must be >= 2, got {}", s.k);
        ensure!(matches!(s.order, 2 | 4), "sizes.order must be 2 or 4, got {}", s.order);
        ensure!(s.halo >= 1, "sizes.halo must be >= 1");
        ensure!(
            s.epsilon > 0.0 && s.epsilon < 1.0,
            "sizes.epsilon must lie in (0, 1), got {}",
            s.epsilon
        );
        if let Some(t) = s.theta {
            ensure!(t > 0.0 && t <= 1.0, "sizes.theta must lie in (0, 1], got {t}");
        }
        if let Some(w) = s.diameter_sweeps {
            ensure!(w >= 1, "sizes.diameter_sweeps must be >= 1");
        }
        let c = &self.caps;
        ensure!(c.diameter_exact >= 1, "caps.diameter_exact must be >= 1");
        ensure!(c.enumeration <= 40, "caps.enumeration must be <= 40");
        ensure!(c.memory_bytes >= 1 << 20, "caps.memory_bytes must be at least 1 MiB");
        for &id in &self.verify.criteria {
            ensure!((1..=16).contains(&id), "verify.criteria entries must be in 1..=16, got {id}");
        }
        Ok(())
    }

    /// Requirements of one subcommand on top of [`ExperimentConfig::validate`].
    pub fn validate_for(&self, command: &str) -> Result<()> {
        self.validate()?;
        let s = &self.sizes;
        let d = self.model.d;
        let cells = |n: usize| (n as u128).pow(d as u32);
        let needs_box = matches!(
            command,
            "sample" | "distance" | "lambda" | "submult" | "tail" | "quantiles" | "compare-kernels" | "consets"
        );
        if needs_box {
            ensure!(cells(s.n) <= 1 << 40, "sizes.n^d is too large");
        }
        if matches!(command, "theta" | "theta-vs-beta" | "diameter") {
            ensure!(s.n_grid.len() >= 4, "{command} needs at least four entries in sizes.n_grid");
        }
        match command {
            "theta-vs-beta" => ensure!(!self.model.betas.is_empty(), "model.betas must not be empty"),
            "tail" => {
                ensure!(
                    s.replicates >= lrp_core::estimators::MIN_TAIL_REPLICATES,
                    "tail needs sizes.replicates >= {}",
                    lrp_core::estimators::MIN_TAIL_REPLICATES
                );
                if s.theta.is_none() {
                    ensure!(
                        s.n_grid.len() >= 4,
                        "tail needs sizes.theta or at least four entries in sizes.n_grid"
                    );
                }
            }
            "diameter" => {
                if s.diameter_sweeps.is_none() {
                    let largest = s.n_grid.iter().copied().max().unwrap_or(0);
                    ensure!(
                        cells(largest) <= self.caps.diameter_exact as u128,
                        "exact diameters need n^d <= caps.diameter_exact; set sizes.diameter_sweeps for a lower bound"
                    );
                }
            }
            "submult" => ensure!(
                s.m < 1 << 12 && s.n < 1 << 12 && s.m * s.n < 1 << 24,
                "sizes.m * sizes.n must be < 2^24"
            ),
            "consets" => {
                ensure!(s.n % 2 == 1, "consets needs an odd sizes.n so the box has a centre");
                ensure!(
                    s.k as usize <= lrp_core::structure::MAX_CONNECTED_SET_SIZE,
                    "sizes.k must be <= {} for consets",
                    lrp_core::structure::MAX_CONNECTED_SET_SIZE
                );
            }
            "cutpoints" => {
                ensure!(d == 1, "cutpoints is defined on the line (model.d = 1)");
                ensure!(self.model.family == KernelFamily::ExactCube, "cutpoints uses the exact kernel");
                ensure!(s.n >= 3 && s.w >= 1 && s.w + 2 <= s.n, "cutpoints needs 1 <= sizes.w <= sizes.n - 2");
            }
            "coupling-check" => {
                ensure!(s.scales.len() == 2, "sizes.scales must be [fine, coarse]");
                let (fine, coarse) = (s.scales[0], s.scales[1]);
                ensure!(coarse >= 1 && coarse <= fine, "sizes.scales needs 1 <= coarse <= fine");
                ensure!(
                    s.epsilon <= 1.0 / fine as f64,
                    "sizes.epsilon must be <= 1 / fine scale"
                );
                ensure!(self.model.family == KernelFamily::ExactCube, "the Poisson cloud realises the exact kernel");
                ensure!(cells(fine) <= 1 << 16, "coupling-check compares all pairs; fine^d must be <= 65536");
            }
            _ => {}
        }
        Ok(())
    }
}

fn check_beta(name: &str, beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        bail!("{name} must be finite and >= 0, got {beta}");
    }
    Ok(())
}
