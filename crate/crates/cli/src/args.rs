use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use orbitsim::simulate::Horizon;

#[derive(Debug, Parser)]
#[command(name = "orbitsim", version, about = "Two-class retrial queue: stability classification, simulation and oracles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Parameter file (key = value lines, or a JSON object).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load coefficients, drifts and the stability verdict.
    Classify,
    /// One trajectory: path or departure-epoch series (CSV), summary (JSON).
    Simulate {
        #[arg(long, default_value = "n=100000")]
        horizon: HorizonArg,
        #[arg(long, value_enum, default_value_t = Series::Path)]
        series: Series,
        /// Keep every k-th record.
        #[arg(long, default_value_t = 1)]
        stride: u64,
    },
    /// Ensemble-averaged orbit sizes on a time grid.
    Ensemble {
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value = "t=20000")]
        horizon: HorizonArg,
        /// Number of grid points.
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Region labels over a grid of retrial rates.
    RegionScan {
        /// a1min:a1max:steps,a2min:a2max:steps
        #[arg(long, default_value = "0.1:15:150,0.1:5:50")]
        grid: GridArg,
    },
    /// The eight reference regimes with their geometry and stability flags.
    Table1 {
        /// Add flags from a trend test on simulated departure-epoch series.
        #[arg(long)]
        simulate: bool,
        #[arg(long, default_value = "n=200000")]
        horizon: HorizonArg,
    },
    /// Runs the oracle checks; exits non-zero if any fails.
    OracleCompare {
        #[arg(long, default_value = "200,200")]
        caps: CapsArg,
        #[arg(long, default_value = "n=1000000")]
        horizon: HorizonArg,
        /// Compare orbit 1 with the single-orbit law instead.
        #[arg(long)]
        theorem3: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Series {
    Path,
    Departures,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonArg(pub Horizon);

impl FromStr for HorizonArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("horizon must be t=T or n=N, got {s:?}");
        let (kind, value) = s.split_once('=').ok_or_else(bad)?;
        match kind.trim() {
            "t" => {
                let t: f64 = value.trim().parse().map_err(|_| bad())?;
                if !(t > 0.0 && t.is_finite()) {
                    return Err(bad());
                }
                Ok(HorizonArg(Horizon::Time(t)))
            }
            "n" => {
                let n: f64 = value.trim().parse().map_err(|_| bad())?;
                if !(n >= 1.0 && n.fract() == 0.0 && n < 1e18) {
                    return Err(bad());
                }
                Ok(HorizonArg(Horizon::Departures(n as u64)))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridArg(pub Axis, pub Axis);

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let axis = |part: &str| -> Result<Axis, String> {
            let bad = || format!("grid axis must be min:max:steps, got {part:?}");
            let f: Vec<&str> = part.split(':').collect();
            let [lo, hi, steps] = f.as_slice() else { return Err(bad()) };
            let min: f64 = lo.trim().parse().map_err(|_| bad())?;
            let max: f64 = hi.trim().parse().map_err(|_| bad())?;
            let steps: usize = steps.trim().parse().map_err(|_| bad())?;
            if !(min > 0.0 && max >= min && max.is_finite()) {
                return Err(format!("grid bounds must be positive with min <= max, got {part:?}"));
            }
            if steps < 2 {
                return Err(format!("grid needs at least 2 steps per axis, got {part:?}"));
            }
            Ok(Axis { min, max, steps })
        };
        let (a, b) = s.split_once(',').ok_or_else(|| format!("grid must have two axes separated by ',', got {s:?}"))?;
        Ok(GridArg(axis(a)?, axis(b)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapsArg(pub u64, pub u64);

impl FromStr for CapsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("caps must be c1,c2, got {s:?}");
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        Ok(CapsArg(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
    }
}
