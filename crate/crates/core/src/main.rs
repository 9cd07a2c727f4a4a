use clap::Parser;

fn main() {
    std::process::exit(secest::cli::run(secest::cli::Cli::parse()));
}
