fn main() {
    std::process::exit(modix_cli::run(std::env::args_os()));
}
