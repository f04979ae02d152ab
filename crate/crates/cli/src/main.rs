//! `pinn`: train networks, evaluate saved parameters, run the
//! finite-difference references and plot fields.
//!
//! Exit status is 0 on success, 2 for configuration and input errors and 3
//! when a computation produced non-finite numbers. `PINN_OUTPUT_DIR`
//! overrides the output directory of every command.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pinn::config::{preset, RunConfig, PRESETS};
use pinn::network::{ConstraintWrapper, NetworkParams};
use pinn::pde::{burgers_fd_solve, heat2d_fd_solve, ConvectionScheme, PdeKind};
use pinn::training::{error_report, train, Model};
use pinn::Error;

const OUTPUT_ENV: &str = "PINN_OUTPUT_DIR";

#[derive(Parser)]
#[command(
    name = "pinn",
    version,
    about = "Physics-informed neural network experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the network described by a config file or preset name.
    Train {
        config: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare saved parameters against the reference solution.
    Evaluate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        config: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the finite-difference solver for a heat or Burgers config.
    Fd {
        config: String,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Spatial step (heat).
        #[arg(long)]
        h: Option<f64>,
        /// Time step.
        #[arg(long)]
        dt: Option<f64>,
        /// Number of time steps (heat).
        #[arg(long)]
        steps: Option<usize>,
        /// Record every this many steps (heat).
        #[arg(long)]
        record_every: Option<usize>,
        /// Number of cells (Burgers).
        #[arg(long)]
        nx: Option<usize>,
        /// Number of output times (Burgers).
        #[arg(long)]
        n_times: Option<usize>,
        /// Convection scheme (Burgers).
        #[arg(long, value_parser = ["central", "upwind"])]
        scheme: Option<String>,
    },
    /// Render grid-field CSV files as grayscale SVG heatmaps.
    Plot {
        #[arg(required = true)]
        fields: Vec<PathBuf>,
        /// Config whose problem names the axes.
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// List the shipped presets, or print one.
    Presets { name: Option<String> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, output } => cmd_train(&config, output),
        Command::Evaluate {
            params,
            config,
            output,
        } => cmd_evaluate(&params, &config, output),
        Command::Fd {
            config,
            output,
            h,
            dt,
            steps,
            record_every,
            nx,
            n_times,
            scheme,
        } => load_config(&config).and_then(|mut cfg| {
            let fd = &mut cfg.fd;
            fd.h = h.or(fd.h);
            fd.dt = dt.or(fd.dt);
            fd.steps = steps.or(fd.steps);
            fd.record_every = record_every.or(fd.record_every);
            fd.nx = nx.or(fd.nx);
            fd.n_times = n_times.or(fd.n_times);
            if let Some(s) = scheme {
                fd.scheme = Some(if s == "upwind" {
                    ConvectionScheme::Upwind
                } else {
                    ConvectionScheme::Central
                });
            }
            cmd_fd(&cfg, output)
        }),
        Command::Plot {
            fields,
            config,
            output,
        } => cmd_plot(&fields, config.as_deref(), output),
        Command::Presets { name } => cmd_presets(name.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(status(&e))
        }
    }
}

fn status(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. } | Error::Numeric { .. } | Error::Domain { .. } => 3,
        _ => 2,
    }
}

/// A config file, or the shipped preset of that name when no such file exists.
fn load_config(arg: &str) -> pinn::Result<RunConfig> {
    let path = Path::new(arg);
    if path.exists() {
        return RunConfig::load(path);
    }
    match preset(arg) {
        Some(text) => RunConfig::parse(text),
        None => Err(Error::Argument(format!(
            "`{arg}` is neither a config file nor a preset name"
        ))),
    }
}

/// The output directory, created if needed: the environment override, the
/// flag or the config, in that order.
fn output_dir(flag: Option<PathBuf>, cfg: Option<&RunConfig>) -> pinn::Result<PathBuf> {
    let dir = std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .or(flag)
        .or_else(|| cfg.map(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| {
        Error::Argument(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    Ok(dir)
}

fn echo_config(cfg: &RunConfig, dir: &Path) -> pinn::Result<()> {
    std::fs::write(dir.join("config.toml"), cfg.resolved()?.to_toml()?)?;
    Ok(())
}

fn cmd_train(config: &str, output: Option<PathBuf>) -> pinn::Result<()> {
    let cfg = load_config(config)?;
    let run = cfg.run()?;
    let dir = output_dir(output, Some(&cfg))?;
    echo_config(&cfg, &dir)?;
    let trained = match train(
        &run.problem,
        &run.network,
        &run.optimizer,
        &run.loss,
        &run.train,
        run.seed,
    ) {
        Ok(t) => t,
        Err(Error::Diverged { iteration, history }) => {
            history.save(&dir)?;
            return Err(Error::Diverged { iteration, history });
        }
        Err(e) => return Err(e),
    };
    trained.history.save(&dir)?;
    trained.model.params().save(&dir.join("params.csv"))?;
    let last = trained.history.last().expect("budget is positive");
    eprintln!(
        "{} iterations, total loss {:.3e}, {} evaluations",
        last.iter, last.total_loss, trained.history.evaluations
    );
    match cfg.reference(run.train.snapshot_shape) {
        Ok(reference) => {
            let report = error_report(&trained.model, &run.problem, &reference)?;
            report.save(&dir)?;
            eprintln!("relative L2 error {:.4e}", report.rel_l2);
        }
        Err(Error::NoReference(why)) => eprintln!("warning: no report written: {why}"),
        Err(e) => return Err(e),
    }
    eprintln!("results in {}", dir.display());
    Ok(())
}

fn cmd_evaluate(params: &Path, config: &str, output: Option<PathBuf>) -> pinn::Result<()> {
    let cfg = load_config(config)?;
    let run = cfg.run()?;
    let base = NetworkParams::load(params, run.network.activation)?;
    if base.sizes() != run.network.layers {
        return Err(Error::Parse {
            path: params.to_path_buf(),
            message: format!(
                "layers {:?} do not match the config {:?}",
                base.sizes(),
                run.network.layers
            ),
        });
    }
    let model = if run.network.hard_constraints {
        Model::Wrapped(ConstraintWrapper::new(base, &run.problem)?)
    } else {
        Model::Plain(base)
    };
    let reference = cfg.reference(run.train.snapshot_shape)?;
    let dir = output_dir(output, Some(&cfg))?;
    let report = error_report(&model, &run.problem, &reference)?;
    report.save(&dir)?;
    eprintln!(
        "relative L2 error {:.4e}, mse {:.4e}",
        report.rel_l2, report.mse
    );
    Ok(())
}

fn cmd_fd(cfg: &RunConfig, output: Option<PathBuf>) -> pinn::Result<()> {
    let problem = cfg.problem()?;
    match problem.kind {
        PdeKind::Heat2d => {
            let c = cfg.heat_fd()?;
            let fields = heat2d_fd_solve(&problem, &c)?;
            let dir = output_dir(output, Some(cfg))?;
            echo_config(cfg, &dir)?;
            for (k, field) in fields.iter().enumerate() {
                let t = (k * c.record_every).min(c.steps) as f64 * c.dt;
                field.save(&dir.join(format!("heat_t{}.csv", round_time(t))))?;
            }
            eprintln!("{} fields in {}", fields.len(), dir.display());
        }
        PdeKind::Burgers => {
            let field = burgers_fd_solve(&cfg.burgers_fd()?)?;
            let dir = output_dir(output, Some(cfg))?;
            echo_config(cfg, &dir)?;
            field.save(&dir.join("burgers_fd.csv"))?;
            eprintln!(
                "{}×{} field in {}",
                field.shape.0,
                field.shape.1,
                dir.display()
            );
        }
        kind => {
            return Err(Error::Argument(format!(
                "finite differences are available for heat2d and burgers, not {kind:?}"
            )))
        }
    }
    Ok(())
}

/// `t` without the rounding noise of repeated `k · dt`.
fn round_time(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

fn cmd_plot(fields: &[PathBuf], config: Option<&str>, output: Option<PathBuf>) -> pinn::Result<()> {
    let labels = match config {
        Some(c) => {
            let problem = load_config(c)?.problem()?;
            if problem.spatial_dim() == 1 {
                ["x", "t"]
            } else {
                ["x", "y"]
            }
        }
        None => ["axis0", "axis1"],
    };
    let dir = match (std::env::var_os(OUTPUT_ENV), &output) {
        (None, None) => None,
        _ => Some(output_dir(output, None)?),
    };
    for path in fields {
        let field = pinn::GridField::load(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
        let svg = plot::render_svg(&field, labels, stem);
        let target = match &dir {
            Some(d) => d.join(format!("{stem}.svg")),
            None => path.with_extension("svg"),
        };
        std::fs::write(&target, svg)?;
        eprintln!("wrote {}", target.display());
    }
    Ok(())
}

fn cmd_presets(name: Option<&str>) -> pinn::Result<()> {
    match name {
        None => {
            for (n, _) in PRESETS {
                println!("{n}");
            }
        }
        Some(n) => match preset(n) {
            Some(text) => print!("{text}"),
            None => return Err(Error::Argument(format!("no preset named `{n}`"))),
        },
    }
    Ok(())
}
