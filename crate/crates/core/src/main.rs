use clap::Parser;

fn main() {
    let cli = levylab::cli::Cli::parse();
    std::process::exit(levylab::cli::run(cli));
}
