use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use simkit::experiment::{self, phase_portrait, PortraitSpec};
use simkit::parallel::Execution;

#[derive(Parser)]
#[command(
    name = "simkit",
    version,
    about = "Slow invariant manifold reconstruction experiments"
)]
struct Cli {
    /// Run sweep points one after another instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML configuration file.
    Run {
        config: PathBuf,
        /// Override a configuration key, e.g. `--set model.gamma=2.0`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// CSV destination; `-` for stdout. Defaults to `[output] path`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a bundled configuration (fig1, fig2, fig3, fig4, mint0, hamiltonian, lagrangian-exact).
    Preset {
        name: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the preset's configuration instead of running it.
        #[arg(long)]
        show: bool,
    },
    /// Trajectories from a grid of start values plus the slow manifold, as CSV.
    Portrait {
        /// `linear2d` or `davis-skodje`.
        model: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
        /// Start values per axis.
        #[arg(long, default_value_t = 5)]
        grid: usize,
        /// Lower and upper bound of both start-value axes.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.0, 2.0])]
        range: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
    },
}

fn write_output(text: &str, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) if p.as_os_str() != "-" => {
            fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
        }
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_config(
    text: &str,
    overrides: &[String],
    out: Option<PathBuf>,
    exec: Execution,
) -> Result<bool> {
    let loaded = experiment::load(text, overrides)?;
    let out = out.or_else(|| loaded.config.output.path.clone().map(PathBuf::from));
    let report = experiment::run(&loaded, exec)?;
    write_output(&report.to_csv()?, out)?;
    if let Some(msg) = report.first_failure() {
        eprintln!("simkit: {msg}");
        return Ok(false);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match cli.command {
        Command::Run {
            config,
            overrides,
            out,
        } => fs::read_to_string(&config)
            .with_context(|| format!("reading {}", config.display()))
            .and_then(|text| run_config(&text, &overrides, out, exec)),
        Command::Preset {
            name,
            overrides,
            out,
            show,
        } => experiment::preset(&name)
            .map_err(Into::into)
            .and_then(|text| {
                if show {
                    print!("{text}");
                    Ok(true)
                } else {
                    run_config(text, &overrides, out, exec)
                }
            }),
        Command::Portrait {
            model,
            gamma,
            out,
            grid,
            range,
            t_end,
        } => (|| {
            let m = match model.as_str() {
                "linear2d" => simkit::make_linear2d(gamma)?,
                "davis-skodje" => simkit::make_davis_skodje(gamma)?,
                other => bail!("no phase portrait for model `{other}`"),
            };
            let spec = PortraitSpec {
                z1_range: (range[0], range[1]),
                z2_range: (range[0], range[1]),
                grid,
                t_end,
                ..PortraitSpec::default()
            };
            let csv = phase_portrait(&m, &spec, exec)?.to_csv()?;
            write_output(&csv, Some(out))?;
            Ok(true)
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("simkit: {e:#}");
            ExitCode::from(2)
        }
    }
}
