fn main() {
    std::process::exit(sgn_cli::run(std::env::args_os()));
}
