use clap::Parser;

fn main() {
    let cli = brainnet::harness::Cli::parse();
    std::process::exit(brainnet::harness::run(cli));
}
