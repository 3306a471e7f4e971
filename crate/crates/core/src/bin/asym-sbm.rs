fn main() {
    std::process::exit(asym_sbm::cli::main_with_args(std::env::args_os()));
}
