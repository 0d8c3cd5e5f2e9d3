use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfstune::error::{Error, Result};
use mfstune::geometry::ThetaVector;
use mfstune::harness::{self, ExperimentConfig, Preset};
use mfstune::oracle::Dipole;
use mfstune::tuner::Strategy;

/// Tune the fictitious-boundary scale factors of an MFS forward solver on
/// the three-shell sphere head model.
#[derive(Parser)]
#[command(name = "mfstune", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file overlaying the preset (unknown keys are fatal).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base profile: `desk` (small) or `paper` (full-size).
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the suggestion strategy: `sko` or `random`.
    #[arg(long)]
    strategy: Option<String>,
    /// Force preemption on/off (off sets the trial minimum to the full
    /// trial length).
    #[arg(long)]
    preemptive: Option<bool>,
    /// Output directory for ledgers and reports.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let preset: Preset = self.preset.parse()?;
        let mut config = ExperimentConfig::load(preset, self.config.as_deref())?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(strategy) = &self.strategy {
            config.strategy = match strategy.as_str() {
                "sko" => Strategy::Sko,
                "random" => Strategy::Random,
                other => {
                    return Err(Error::Config(format!(
                        "unknown strategy '{other}' (expected 'sko' or 'random')"
                    )))
                }
            };
        }
        match self.preemptive {
            Some(true) => {
                if config.trial_min >= config.trial_len {
                    return Err(Error::Config(format!(
                        "preemption needs trial_min < trial_len, got {} vs {}",
                        config.trial_min, config.trial_len
                    )));
                }
                config.preemptive = true;
            }
            Some(false) => {
                config.trial_min = config.trial_len;
                config.preemptive = false;
            }
            None => {}
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// One forward solve of a factor vector on one dipole, scored against
    /// the analytic reference.
    Forward {
        #[command(flatten)]
        common: Common,
        /// Five comma-separated factors: scalp-inflation, scalp-deflation,
        /// skull-inflation, skull-deflation, brain-inflation.
        #[arg(long, value_delimiter = ',', num_args = 5, allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
        /// Dipole as x,y,z,qx,qy,qz (meters and A·m).
        #[arg(long, value_delimiter = ',', num_args = 6, allow_negative_numbers = true)]
        dipole: Option<Vec<f64>>,
    },
    /// Run the oracle self-consistency suite.
    OracleCheck {
        #[command(flatten)]
        common: Common,
    },
    /// One tuning run; writes an append-only ledger under --out.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Continue an interrupted run from its ledger file.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Paired comparison of kriging vs random search, standard vs
    /// preemptive; emits CSV/JSON/text tables under --out.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Rebuild the comparison table from the ledgers in a directory.
    Report {
        /// Directory holding .ndjson run files.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forward {
            common,
            theta,
            dipole,
        } => {
            let config = common.load()?;
            let theta = match theta {
                Some(v) => ThetaVector::from_array([v[0], v[1], v[2], v[3], v[4]]),
                None => ThetaVector::new(1.5, 0.7, 1.3, 0.6, 1.4),
            };
            let dipole = match dipole {
                Some(v) => Dipole::new([v[0], v[1], v[2]], [v[3], v[4], v[5]]),
                None => harness::commands::default_probe_dipole(&config),
            };
            let report = harness::run_forward(&config, &theta, &dipole)?;
            println!("{report}");
            Ok(())
        }
        Command::OracleCheck { common } => {
            let config = common.load()?;
            let report = harness::run_oracle_check(&config)?;
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Error::Numerical("oracle self-consistency failed".into()))
            }
        }
        Command::Tune { common, resume } => {
            let config = common.load()?;
            let summary = match resume {
                Some(path) => harness::run_tune_resume(&config, &path)?,
                None => harness::run_tune(&config, &common.out)?,
            };
            println!("{summary}");
            Ok(())
        }
        Command::Compare { common } => {
            let config = common.load()?;
            let table = harness::run_compare(&config, &common.out)?;
            print!("{}", table.to_text());
            println!("reports written under {}", common.out.display());
            Ok(())
        }
        Command::Report { out } => {
            let table = harness::run_report(&out)?;
            print!("{}", table.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
