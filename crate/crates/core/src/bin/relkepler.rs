use clap::Parser;

fn main() {
    std::process::exit(relkepler::cli::run(relkepler::cli::Cli::parse()));
}
