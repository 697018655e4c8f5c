use clap::Parser;

fn main() {
    let cli = chroma::cli::Cli::parse();
    std::process::exit(chroma::cli::main_with(&cli));
}
