use clap::Parser;

fn main() {
    let cli = cfhmm_cli::Cli::parse();
    if let Err(e) = cfhmm_cli::run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
