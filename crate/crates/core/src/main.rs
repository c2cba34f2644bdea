fn main() {
    std::process::exit(offshore_market::cli::run(std::env::args_os()));
}
