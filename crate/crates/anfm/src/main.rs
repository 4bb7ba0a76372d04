use clap::Parser;

fn main() {
    let cli = anfm::cli::Cli::parse();
    if let Err(e) = anfm::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
