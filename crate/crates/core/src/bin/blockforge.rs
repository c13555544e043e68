use clap::Parser;

fn main() {
    let cli = blockforge::io::Cli::parse();
    std::process::exit(blockforge::io::main_with(cli));
}
