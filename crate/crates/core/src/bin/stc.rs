use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use stc::cli::{self, Cli, Command};
use stc::pipeline::{configure_threads, threads_from_env};

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let manifest = cli::cmd_gen(&args)
                .with_context(|| format!("generating dataset in {}", args.out.display()))?;
            println!(
                "wrote {} simple, {} complex, {} eval records to {}",
                manifest.count(stc::data::Split::Simple),
                manifest.count(stc::data::Split::Complex),
                manifest.count(stc::data::Split::Eval),
                args.out.display()
            );
        }
        Command::Saliency(args) => {
            let n = cli::cmd_saliency(&args)?;
            println!("computed {n} saliency maps");
        }
        Command::Run(args) => {
            let report = cli::cmd_run(&args)?;
            print!("{}", cli::format_report(&report));
            for s in &report.stages {
                eprintln!("{}: {:.1}s", s.stage, s.seconds);
            }
        }
        Command::Stage(args) => {
            let report = cli::cmd_stage(&args)?;
            print!("{}", cli::format_report(&report));
        }
        Command::Eval(args) => {
            let evaluation = cli::cmd_eval(&args)?;
            print!("{}", cli::format_evaluation(&evaluation));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(threads_from_env());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
