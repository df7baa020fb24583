use clap::Parser;

fn main() {
    let cli = glcarleman::cli::Cli::parse();
    std::process::exit(glcarleman::cli::run(cli));
}
