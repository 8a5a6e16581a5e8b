use clap::Parser;

fn main() {
    let cli = biolcnet_cli::Cli::parse();
    match std::panic::catch_unwind(|| biolcnet_cli::run(cli)) {
        Ok(Ok(summary)) => println!("{summary}"),
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
        Err(_) => std::process::exit(3),
    }
}
