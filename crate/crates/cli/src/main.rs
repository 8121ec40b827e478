fn main() {
    std::process::exit(qjump_cli::run_cli(std::env::args_os()));
}
