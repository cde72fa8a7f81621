use clap::Parser;

fn main() {
    let cli = dasgil::cli::Cli::parse();
    if let Err(err) = dasgil::cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
