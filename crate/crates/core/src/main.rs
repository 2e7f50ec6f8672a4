fn main() {
    std::process::exit(dhtsmc::cli::run_cli(std::env::args_os()));
}
