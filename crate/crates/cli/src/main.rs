use std::process::ExitCode;

use attnshift_cli::{run, Cli};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

const SYNOPSIS: &str = "\
usage:
  attnshift optimize --image I --mask M --out O --params-out P [--mode increase|decrease] [--iters N] [--seed S] [--styles K] [--saliency-provider SPEC]
  attnshift apply --image I --mask M --params P --alpha A --out O [--max-dim D] [--style K]
  attnshift metrics --original I --edited E --mask M [--saliency-provider SPEC] [--format csv|json]
  attnshift video --frames DIR --masks DIR --params FILE --out DIR
  attnshift serve --port P [--static DIR]";

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = Cli::command().write_long_help(&mut std::io::stderr());
                    eprintln!("\n{SYNOPSIS}");
                    ExitCode::from(1)
                }
                _ => {
                    eprintln!("{}", e.render().to_string().trim_end());
                    eprintln!("\n{SYNOPSIS}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
