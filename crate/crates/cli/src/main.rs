use clap::Parser;
use evoq_cli::{run, Cli};

fn main() {
    if let Ok(threads) = std::env::var("EVOQ_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .expect("the global thread pool is configured once");
            }
            _ => {
                eprintln!("evoq: EVOQ_THREADS must be a positive integer, got {threads:?}");
                std::process::exit(2);
            }
        }
    }
    let cli = Cli::parse();
    std::process::exit(run(&cli));
}
