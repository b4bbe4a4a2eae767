use std::io;

fn main() {
    let code = hasc::cli::main_with_args(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr());
    std::process::exit(code);
}
