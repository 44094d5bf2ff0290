use clap::Parser;
use fgvd_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    match fgvd_cli::run(cli) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
