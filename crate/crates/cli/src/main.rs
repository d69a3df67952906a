use std::process::ExitCode;

use clap::Parser;
use lstm_evt_cli::args::{Cli, Command};
use lstm_evt_cli::stages::{self, Which};
use lstm_evt_cli::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Pipeline(args) => {
            let cfg = args.resolve()?;
            let summary = stages::run_pipeline(&cfg)?;
            print!("{}", stages::render_metrics(&summary));
            println!("artifacts: {}", cfg.output_dir.display());
        }
        Command::Split(args) => {
            let cfg = args.resolve()?;
            let m = stages::run_split(&cfg, &cfg.output_dir)?;
            println!(
                "{}: {} points, train_end {}, validation_end {}",
                m.series_name, m.len, m.train_end, m.validation_end
            );
        }
        Command::Train(d) => match stages::run_train(&d.dir)? {
            Some(r) => println!(
                "epochs {}, best epoch {}, validation MSE {:.6e}",
                r.epochs_run,
                r.best_epoch,
                r.best_validation_mse()
            ),
            None => println!("external errors configured; nothing to train"),
        },
        Command::Errors(d) => {
            let e = stages::run_errors(&d.dir)?;
            println!("{} errors", e.len());
        }
        Command::Detect { dir, rule } => {
            let rule = rule.into();
            let flags = stages::run_detect(&dir.dir, rule)?;
            println!(
                "{}: {} flagged",
                lstm_evt_cli::artifacts::Rule::name(rule),
                flags.len()
            );
        }
        Command::Test { dir, which } => {
            let which: Vec<Which> = which.into_iter().map(Into::into).collect();
            for r in stages::run_tests(&dir.dir, &which)? {
                println!(
                    "{} {}: statistic {:.6}, p {}, reject {}",
                    r.series,
                    r.report.test_name,
                    r.report.statistic,
                    r.report.p_value_display(),
                    r.report.reject_null
                );
            }
        }
        Command::Evaluate(d) => {
            print!("{}", stages::render_metrics(&stages::run_evaluate(&d.dir)?))
        }
        Command::Report(d) => {
            let rows = stages::run_report(&d.dir)?;
            println!("{rows} plot rows");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
