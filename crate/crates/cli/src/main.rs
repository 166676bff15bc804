use clap::Parser;

use bmdetect_cli::{run, Cli, EXIT_CONFIG};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = cli.command.into_config().and_then(|c| run(&c));
    match result {
        Ok(out) => {
            println!("{}", out.summary);
            for p in &out.outputs {
                println!("wrote {}", p.display());
            }
            std::process::exit(out.exit_code);
        }
        Err(e) => {
            eprintln!("bmdetect: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
