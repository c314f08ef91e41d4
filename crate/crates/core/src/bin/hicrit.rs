use std::io::Write;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let (code, out, err) = hicrit::cli::run(&argv);
    std::io::stdout().write_all(out.as_bytes()).ok();
    std::io::stderr().write_all(err.as_bytes()).ok();
    std::process::exit(code);
}
