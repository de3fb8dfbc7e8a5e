fn main() {
    std::process::exit(xdiff::harness::cli::main_with_args(std::env::args_os()));
}
