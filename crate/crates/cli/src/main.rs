use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ravine::harness::output::{meta_json, num, write_all};
use ravine::harness::{self, parse_config, IniDoc, RunConfig};
use ravine::lyapunov::{default_window, rate_slope};
use ravine::ode::OdeModel;
use ravine::Error;

#[derive(Parser)]
#[command(name = "ravine", version, about = "Run and diagnose NAG/RAG experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trace, diagnostics and metadata.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Report conditions K0, K1, K1+ and the special-class constant.
    Check {
        config: PathBuf,
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// Seeded Monte Carlo replications.
    Mc {
        config: PathBuf,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Compare the discrete Ravine scheme with the continuous model.
    OdeCompare {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        s_values: Vec<f64>,
        /// Grid offset c in τ_k = (k + c)h; `nesterov` means 1 − α/2.
        #[arg(long, default_value = "1")]
        offset: String,
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        #[arg(long, value_enum, default_value_t = Model::Highres)]
        model: Model,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the config once per value of one key.
    Sweep {
        config: PathBuf,
        /// `section.key`, e.g. `schedule.alpha`.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Igs,
    Highres,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> ravine::Result<()> {
    match command {
        Command::Run { config, out } => {
            let cfg = parse_config(&config)?;
            let (summary, _) = harness::run_experiment(&cfg, &out, &stem(&config))?;
            println!("{summary}");
        }
        Command::Check { config, kmax } => {
            let cfg = parse_config(&config)?;
            let report = harness::check(&cfg, kmax)?;
            print!("{}", report.render_text());
            println!("{}", report.render_json());
        }
        Command::Mc { config, reps, seed, out } => {
            let cfg = parse_config(&config)?;
            let mc = harness::monte_carlo(&cfg, reps, seed)?;
            let path = out.join(format!("{}.mc.csv", stem(&config)));
            let meta = out.join(format!("{}.mc.meta.json", stem(&config)));
            write_all(&[
                (path.clone(), mc.to_csv(|k| cfg.run.retains(k))),
                (meta, meta_json("mc", &cfg.hash(), &[&path])),
            ])?;
            for (s, why) in &mc.failed {
                eprintln!("replication with seed {s} failed: {why}");
            }
            let (lo, hi) = cfg.diagnostics.rate_window.unwrap_or_else(|| default_window(cfg.run.iterations));
            let slope = rate_slope(&mc.gap.median, lo, hi)
                .map(|s| format!("{s:.4}"))
                .unwrap_or_else(|_| "n/a".into());
            println!(
                "R={} ok={} final_median_gap={:.6e} median_slope={slope} on [{lo}, {hi}]",
                mc.reps,
                mc.succeeded(),
                mc.gap.median.last().copied().unwrap_or(f64::NAN),
            );
        }
        Command::OdeCompare {
            config,
            s_values,
            offset,
            horizon,
            model,
            out,
        } => {
            let cfg = parse_config(&config)?;
            let c = match offset.as_str() {
                "nesterov" => match cfg.schedule {
                    harness::ScheduleConfig::NesterovOffset { alpha } => 1.0 - alpha / 2.0,
                    _ => return Err(config_error("offset `nesterov` needs a nesterov_offset schedule")),
                },
                v => v
                    .parse()
                    .map_err(|_| config_error(&format!("--offset `{v}` is not a number or `nesterov`")))?,
            };
            let model = match model {
                Model::Igs => OdeModel::Igs,
                Model::Highres => OdeModel::HighRes,
            };
            let profiles = harness::ode_compare_config(&cfg, &s_values, c, horizon, model)?;
            let mut csv = String::from("s,k,tau,error\n");
            println!("s,sup_error");
            for (s, p) in &profiles {
                println!("{},{}", num(*s), num(p.sup));
                for i in 0..p.k.len() {
                    csv.push_str(&format!("{},{},{},{}\n", num(*s), p.k[i], num(p.tau[i]), num(p.error[i])));
                }
            }
            let path = out.join(format!("{}.ode.csv", stem(&config)));
            write_all(&[(path, csv)])?;
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| config_error(&format!("cannot read {}: {e}", config.display())))?;
            let doc = IniDoc::parse(&text)?;
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            // validate the template itself before sweeping
            RunConfig::from_doc(&doc, &base)?;
            let table = harness::sweep(&doc, &base, &axis, &values)?;
            let csv = table.to_csv();
            print!("{csv}");
            let path = out.join(format!("{}.sweep.csv", stem(&config)));
            write_all(&[(path, csv)])?;
        }
    }
    Ok(())
}

fn config_error(msg: &str) -> Error {
    Error::Config {
        line: None,
        msg: msg.to_string(),
    }
}
