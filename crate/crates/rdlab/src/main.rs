use clap::Parser;

fn main() {
    let cli = rdlab::cli::Cli::parse();
    match rdlab::cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(2);
        }
    }
}
