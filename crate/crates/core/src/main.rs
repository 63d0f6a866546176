use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stopwindow::baselines::parse_strategy_list;
use stopwindow::cli;
use stopwindow::trace::Columns;
use stopwindow::{CurveParams, DetectorConfig, ExtremumMode, Format, SizeSemantics};

#[derive(Parser)]
#[command(name = "stopwindow", version, about = "Stop-window early stopping for training curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a trace through the detector and print the decision.
    Detect {
        /// CSV or JSONL trace; `-` reads standard input.
        trace: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Compare the detector against loss-based baselines.
    Compare {
        trace: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        columns: ColumnArgs,
        /// Comma-separated: earlys1..earlys4, previncrease:<f>, patience:<p>[:<min_delta>]
        #[arg(long, default_value = "earlys1,earlys2,earlys3,earlys4")]
        strategies: String,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
    },
    /// Summary statistics of the detected stop window.
    Stats {
        trace: PathBuf,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        columns: ColumnArgs,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
    },
    /// Write a seeded synthetic trace as CSV.
    Simulate {
        #[arg(long = "max-epochs", default_value_t = 200)]
        max_epochs: u32,
        #[arg(long, default_value_t = 85.0)]
        ceiling: f64,
        #[arg(long = "metric-rate", default_value_t = 8.0)]
        metric_rate: f64,
        #[arg(long = "loss-floor", default_value_t = 0.2)]
        loss_floor: f64,
        #[arg(long = "loss-rate", default_value_t = 10.0)]
        loss_rate: f64,
        #[arg(long = "overfit-onset", default_value_t = 60)]
        overfit_onset: u32,
        #[arg(long = "overfit-slope", default_value_t = 0.002)]
        overfit_slope: f64,
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; standard output when omitted.
        #[arg(short = 'o')]
        output: Option<PathBuf>,
    },
    /// Line-protocol session: one JSON request per stdin line, one response per stdout line.
    Serve {
        #[command(flatten)]
        detector: DetectorArgs,
    },
}

#[derive(Args)]
struct DetectorArgs {
    /// Minimum stop-window size.
    #[arg(long = "N", default_value_t = 4)]
    min_window: u32,
    /// Maximum consecutive metric difference inside a window (exclusive).
    #[arg(long = "D", default_value_t = 2.0)]
    max_oscillation: f64,
    /// Training horizon; 200 when omitted (required by `serve`).
    #[arg(long = "max-epochs")]
    max_epochs: Option<u32>,
    #[arg(long, value_enum, default_value = "signchange")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long = "size", value_enum, default_value = "exclusive")]
    size: SizeArg,
}

impl DetectorArgs {
    fn config(&self) -> DetectorConfig {
        DetectorConfig {
            min_window: self.min_window,
            max_oscillation: self.max_oscillation,
            max_epochs: self.max_epochs.unwrap_or(200),
            mode: match self.mode {
                ModeArg::Strict => ExtremumMode::Strict,
                ModeArg::Signchange => ExtremumMode::SignChange,
            },
            epsilon: self.epsilon,
            size_semantics: match self.size {
                SizeArg::Exclusive => SizeSemantics::Exclusive,
                SizeArg::Inclusive => SizeSemantics::Inclusive,
            },
        }
    }
}

#[derive(Args)]
struct ColumnArgs {
    #[arg(long = "metric-col", default_value = "metric")]
    metric_col: String,
    #[arg(long = "loss-col", default_value = "val_loss")]
    loss_col: String,
}

impl ColumnArgs {
    fn columns(&self) -> Columns {
        Columns {
            metric: self.metric_col.clone(),
            val_loss: self.loss_col.clone(),
            ..Columns::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Signchange,
}

#[derive(Clone, Copy, ValueEnum)]
enum SizeArg {
    Exclusive,
    Inclusive,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Markdown => Format::Markdown,
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

fn run(command: Command) -> stopwindow::Result<i32> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Detect { trace, detector, columns, format } => {
            let config = detector.config();
            config.validate()?;
            let trace = cli::load_trace(&trace, &columns.columns())?;
            cli::cmd_detect(&trace, &config, format.into(), &mut out)
        }
        Command::Compare { trace, detector, columns, strategies, format } => {
            let config = detector.config();
            config.validate()?;
            let specs = parse_strategy_list(&strategies)?;
            let trace = cli::load_trace(&trace, &columns.columns())?;
            cli::cmd_compare(&trace, &config, &specs, format.into(), &mut out)
        }
        Command::Stats { trace, detector, columns, format } => {
            let config = detector.config();
            config.validate()?;
            let trace = cli::load_trace(&trace, &columns.columns())?;
            cli::cmd_stats(&trace, &config, format.into(), &mut out)
        }
        Command::Simulate {
            max_epochs,
            ceiling,
            metric_rate,
            loss_floor,
            loss_rate,
            overfit_onset,
            overfit_slope,
            noise,
            seed,
            output,
        } => {
            let params = CurveParams {
                max_epochs,
                metric_ceiling: ceiling,
                metric_rate,
                loss_floor,
                loss_rate,
                overfit_onset,
                overfit_slope,
                noise_amplitude: noise,
                seed,
            };
            params.validate()?;
            match output {
                Some(path) => {
                    let mut file = BufWriter::new(File::create(path)?);
                    let code = cli::cmd_simulate(&params, &mut file)?;
                    file.flush()?;
                    Ok(code)
                }
                None => cli::cmd_simulate(&params, &mut out),
            }
        }
        Command::Serve { detector } => {
            if detector.max_epochs.is_none() {
                return Err(stopwindow::Error::InvalidConfig(
                    "serve requires an explicit --max-epochs".into(),
                ));
            }
            let config = detector.config();
            let stdin = io::stdin();
            cli::cmd_serve(&config, stdin.lock(), &mut out)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let args = Cli::parse();
    let code = match run(args.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            cli::exit_code(&err)
        }
    };
    process::exit(code);
}
