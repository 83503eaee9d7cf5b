mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn run(cli: &Cli) -> Result<(), commands::CliError> {
    match &cli.command {
        Command::Params(a) => commands::params(a),
        Command::Summarize(a) => commands::summarize_cmd(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Cv(a) => commands::cv_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Metrics(a) => commands::metrics_cmd(a),
        Command::Robustness(a) => commands::robustness_cmd(a),
        Command::Synth(a) => commands::synth_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dcunet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
