fn main() {
    std::process::exit(eigopt_cli::run(std::env::args_os()));
}
