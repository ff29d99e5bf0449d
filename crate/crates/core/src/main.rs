use clap::Parser;

fn main() {
    std::process::exit(rankone::cli::run(rankone::cli::Cli::parse()));
}
