fn main() {
    std::process::exit(eomsim::cli::run(std::env::args_os()));
}
