use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use frameflow_core::dynamics::{load_system, lookup, Geometry, RegistryOptions, SystemSpec, DEFAULT_STEP};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, failed, Result};

#[derive(Parser, Debug)]
#[command(name = "frameflow", version, about = "Frame flows, Lyapunov spectra, periodic orbits and hyperbolicity certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Finite-time Lyapunov spectrum from the (transversal) frame flow.
    Spectrum(SpectrumArgs),
    /// Periodic orbits by exact enumeration or recurrence scan and Newton refinement.
    Periodic(PeriodicArgs),
    /// Uniform contraction certificate for the stable and unstable bundles.
    Certify(CertifyArgs),
    /// Bounded-Lipschitz distance between empirical and periodic measures.
    Measures(MeasuresArgs),
    /// Transversal spectrum of a suspension flow against its base map.
    SuspendSpectrum(SuspendArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Registry name (cat, cat-perturbed, diag:a,b, circle-rotation:t,
    /// rotation-flow, constant-flow, suspension:<map>) or path to a JSON system.
    #[arg(long)]
    pub system: Option<String>,
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for report files; reports go to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial state, comma separated; drawn from the seed when absent.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub state: Option<Vec<f64>>,
    /// Perturbation size for cat-perturbed.
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Roof for suspensions.
    #[arg(long)]
    pub roof: Option<f64>,
    /// Integration step for flows.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub reorth_every: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Horizon in map iterates.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Horizon in flow time.
    #[arg(long)]
    pub time: Option<f64>,
    /// Iterates (maps) or time (flows) discarded before averaging.
    #[arg(long)]
    pub burn_in: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PeriodicArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Largest period (steps for maps, return time for flows).
    #[arg(long)]
    pub max_period: Option<usize>,
    /// Enumerate periodic points exactly (linear toral automorphisms only).
    #[arg(long)]
    pub exact: bool,
    /// Recurrence radius for the scan.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub time: Option<f64>,
    /// Closing tolerance for Newton refinement.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Contraction rate of the stable bundle.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Expansion rate of the unstable bundle; defaults to sigma.
    #[arg(long)]
    pub varsigma: Option<f64>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub stride: Option<f64>,
    /// Number of base points along the orbit.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Horizon of the spectrum that fixes the bundle dimensions.
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub time: Option<f64>,
    #[arg(long)]
    pub zero_threshold: Option<f64>,
    /// Window averages this close to the bound are inconclusive.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug)]
pub struct MeasuresArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Recurrence radii, comma separated, in refinement order.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub time: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SuspendArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Flow time; the base map runs time/roof iterates.
    #[arg(long)]
    pub time: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<f64>,
}

/// Every setting a run can take, from flags or a config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Options {
    pub system: Option<String>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub state: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub roof: Option<f64>,
    pub h: Option<f64>,
    pub reorth_every: Option<usize>,
    pub burn_in: Option<f64>,
    pub steps: Option<u64>,
    pub time: Option<f64>,
    pub max_period: Option<usize>,
    pub exact: Option<bool>,
    pub alpha: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub sigma: Option<f64>,
    pub varsigma: Option<f64>,
    pub t0: Option<f64>,
    pub tmax: Option<f64>,
    pub stride: Option<f64>,
    pub samples: Option<usize>,
    pub zero_threshold: Option<f64>,
}

macro_rules! overlay {
    ($flags:expr, $file:expr; $($field:ident),*) => {
        Options { $($field: $flags.$field.or($file.$field)),* }
    };
}

impl Options {
    fn from_common(c: CommonArgs) -> (Options, Option<PathBuf>) {
        let opts = Options {
            system: c.system,
            output: c.output,
            format: c.format,
            seed: c.seed,
            state: c.state,
            eps: c.eps,
            roof: c.roof,
            h: c.h,
            reorth_every: c.reorth_every,
            ..Default::default()
        };
        (opts, c.config)
    }

    /// Flags win over the file.
    pub fn overlay(self, file: Options) -> Options {
        overlay!(self, file; system, output, format, seed, state, eps, roof, h, reorth_every,
            burn_in, steps, time, max_period, exact, alpha, alphas, tolerance, sigma, varsigma,
            t0, tmax, stride, samples, zero_threshold)
    }

    pub fn read(path: &Path) -> Result<Options> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Both)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn registry(&self) -> RegistryOptions {
        let d = RegistryOptions::default();
        RegistryOptions {
            eps: self.eps.unwrap_or(d.eps),
            roof: self.roof.unwrap_or(d.roof),
        }
    }

    pub fn system_name(&self) -> Result<&str> {
        self.system
            .as_deref()
            .ok_or_else(|| config("missing --system (see --help for usage)"))
    }

    /// A registry name, or a path to a JSON description.
    pub fn system_spec(&self) -> Result<SystemSpec> {
        let name = self.system_name()?;
        let path = Path::new(name);
        if name.ends_with(".json") || path.is_file() {
            load_system(path).map_err(failed("load_system"))
        } else {
            lookup(name, &self.registry()).map_err(failed("lookup"))
        }
    }

    pub fn step(&self) -> Result<f64> {
        positive("h", self.h.unwrap_or(DEFAULT_STEP))
    }

    pub fn reorth_every(&self) -> Result<usize> {
        match self.reorth_every.unwrap_or(1) {
            0 => Err(config("--reorth-every must be at least 1")),
            k => Ok(k),
        }
    }

    /// The explicit state, or one drawn from the seed: uniform on tori
    /// (and on the base of a toral mapping torus), the origin otherwise.
    pub fn initial_state(&self, sys: &SystemSpec) -> Result<DVector<f64>> {
        if let Some(s) = &self.state {
            if s.len() != sys.dim() {
                return Err(config(format!(
                    "--state has {} coordinates, `{}` needs {}",
                    s.len(),
                    sys.name,
                    sys.dim()
                )));
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(config("--state must be finite"));
            }
            return Ok(DVector::from_vec(s.clone()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
        rng.set_stream(1);
        let n = sys.dim();
        Ok(match &sys.geometry {
            Geometry::Torus => DVector::from_fn(n, |_, _| rng.random::<f64>()),
            Geometry::MappingTorus(t) if t.has_lattice() => {
                DVector::from_fn(n, |i, _| if i + 1 < n { rng.random::<f64>() } else { 0.0 })
            }
            _ => DVector::zeros(n),
        })
    }

    /// Map horizon from `--steps` or flow horizon from `--time`.
    pub fn horizon(&self, sys: &SystemSpec, map_default: u64, flow_default: f64) -> Result<f64> {
        if sys.is_flow() {
            if self.steps.is_some() {
                return Err(config(format!("`{}` is a flow: use --time, not --steps", sys.name)));
            }
            positive("time", self.time.unwrap_or(flow_default))
        } else {
            if self.time.is_some() {
                return Err(config(format!("`{}` is a map: use --steps, not --time", sys.name)));
            }
            match self.steps.unwrap_or(map_default) {
                0 => Err(config("--steps must be at least 1")),
                n => Ok(n as f64),
            }
        }
    }
}

pub fn positive(name: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(config(format!("--{name} must be positive and finite, got {x}")))
    }
}

fn with_file(common: CommonArgs, fill: impl FnOnce(&mut Options)) -> Result<Options> {
    let (mut opts, path) = Options::from_common(common);
    fill(&mut opts);
    match path {
        Some(p) => Ok(opts.overlay(Options::read(&p)?)),
        None => Ok(opts),
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Periodic(_) => "periodic",
            Command::Certify(_) => "certify",
            Command::Measures(_) => "measures",
            Command::SuspendSpectrum(_) => "suspend-spectrum",
        }
    }

    /// Collapse flags and the optional config file into one set of options.
    pub fn options(self) -> Result<Options> {
        match self {
            Command::Spectrum(a) => with_file(a.common, |o| {
                o.steps = a.steps;
                o.time = a.time;
                o.burn_in = a.burn_in;
            }),
            Command::Periodic(a) => with_file(a.common, |o| {
                o.max_period = a.max_period;
                o.exact = a.exact.then_some(true);
                o.alpha = a.alpha;
                o.steps = a.steps;
                o.time = a.time;
                o.tolerance = a.tolerance;
            }),
            Command::Certify(a) => with_file(a.common, |o| {
                o.sigma = a.sigma;
                o.varsigma = a.varsigma;
                o.t0 = a.t0;
                o.tmax = a.tmax;
                o.stride = a.stride;
                o.samples = a.samples;
                o.steps = a.steps;
                o.time = a.time;
                o.zero_threshold = a.zero_threshold;
                o.tolerance = a.tolerance;
            }),
            Command::Measures(a) => with_file(a.common, |o| {
                o.alphas = a.alphas;
                o.steps = a.steps;
                o.time = a.time;
                o.tolerance = a.tolerance;
            }),
            Command::SuspendSpectrum(a) => with_file(a.common, |o| {
                o.time = a.time;
                o.burn_in = a.burn_in;
            }),
        }
    }
}
