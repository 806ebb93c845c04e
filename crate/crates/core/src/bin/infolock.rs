use clap::Parser;

fn main() {
    let args = infolock::cli::Args::parse();
    std::process::exit(infolock::cli::run(args));
}
