use clap::Parser;

fn main() {
    let cli = stylegen::cli::Cli::parse();
    std::process::exit(stylegen::cli::run(cli));
}
