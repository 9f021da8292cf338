use clap::Parser;

fn main() {
    std::process::exit(torus_orbits::cli::run(torus_orbits::cli::Cli::parse()));
}
