fn main() {
    std::process::exit(rpseries_cli::run(std::env::args_os()));
}
