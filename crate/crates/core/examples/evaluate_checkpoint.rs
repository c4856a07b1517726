//! Evaluates a saved checkpoint on a dataset's eval split.
//!
//! cargo run --example evaluate_checkpoint -- <checkpoint.stcp> <data-dir>

use std::path::PathBuf;

use stc::cli::{cmd_eval, format_evaluation, EvalArgs};

fn main() -> stc::Result<()> {
    let mut args = std::env::args().skip(1);
    let (Some(checkpoint), Some(data)) = (args.next(), args.next()) else {
        eprintln!("usage: evaluate_checkpoint <checkpoint.stcp> <data-dir>");
        std::process::exit(2);
    };
    let eval = cmd_eval(&EvalArgs {
        checkpoint: PathBuf::from(checkpoint),
        data: PathBuf::from(data),
    })?;
    print!("{}", format_evaluation(&eval));
    Ok(())
}
