fn main() {
    std::process::exit(minictx::cli::main_with_args(std::env::args_os()));
}
