use clap::Parser;

fn main() {
    let cli = rdpg_cli::Cli::parse();
    if let Err(err) = rdpg_cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
