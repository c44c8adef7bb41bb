use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    let cli = match rwre_cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => rwre_cli::EXIT_INVALID,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(rwre_cli::run(&cli));
}
