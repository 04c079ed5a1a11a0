use std::process::exit;

fn main() {
    exit(zood::cli::run(std::env::args_os()));
}
