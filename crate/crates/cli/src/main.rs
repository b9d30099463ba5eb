fn main() {
    std::process::exit(starima_cli::run(std::env::args_os()));
}
