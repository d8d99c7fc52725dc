fn main() {
    std::process::exit(velod_cli::cli::run(std::env::args_os()));
}
