use clap::Parser;
use qtrl::cli::{self, Cli, Command};

fn main() {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Train(args) => run(|| {
            let config = args.overrides.resolve()?;
            cli::cmd_train(&config).map(|_| ())
        }),
        Command::BenchSpeedup(args) => run(|| {
            let config = args.overrides.resolve()?;
            cli::cmd_bench_speedup(&config, &args.bench_agents).map(|_| ())
        }),
        Command::Verify(args) => {
            let reports = cli::cmd_verify(args.suite);
            if reports.iter().all(|r| r.passed) {
                0
            } else {
                1
            }
        }
        Command::Eval(args) => run(|| cli::cmd_eval(&args).map(|_| ())),
    };
    std::process::exit(status);
}

fn run(body: impl FnOnce() -> qtrl::Result<()>) -> i32 {
    match body() {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}
