use clap::Parser;
use drltrade_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {}", e.stage, e.message);
            e.code
        }
    };
    std::process::exit(code);
}
