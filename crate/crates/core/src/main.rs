use std::io;

fn main() {
    let status = openbook::cli::run_command(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(status);
}
