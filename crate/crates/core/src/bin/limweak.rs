fn main() {
    std::process::exit(limweak::cli::run_cli(std::env::args_os()));
}
