use std::process::ExitCode;

use vortex_cli::{parse_args, run, EXIT_CONFIG};

fn main() -> ExitCode {
    let cfg = match parse_args(std::env::args_os()) {
        Ok(Ok(cfg)) => cfg,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            // usage errors exit with 2, --help and --version with 0
            e.exit();
        }
    };
    match run(&cfg) {
        Ok(report) => {
            if let Some(limit) = &report.limit {
                println!(
                    "converged: eps = {:e}, flux = {:.10}, min u = {:e}",
                    limit.eps, limit.flux, report.min_u
                );
            } else if let Some(o) = &report.oracle {
                println!("shooting: a = {:.12}, beta = {:.12}", o.a, o.beta);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
