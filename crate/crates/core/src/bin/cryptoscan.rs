fn main() {
    std::process::exit(cryptoscan::cli::run_cli(std::env::args_os()));
}
