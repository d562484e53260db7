use clap::Parser;

fn main() {
    std::process::exit(plcml_cli::main_with(plcml_cli::Cli::parse()));
}
