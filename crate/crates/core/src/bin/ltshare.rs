use clap::Parser;

fn main() {
    let cli = ltshare::cli::Cli::parse();
    if let Err(e) = ltshare::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
