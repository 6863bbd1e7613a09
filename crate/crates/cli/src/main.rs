use clap::Parser;

use pwaq::args::Cli;
use pwaq::commands::run;

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{}", out.stdout);
            std::process::exit(out.code);
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}
