fn main() {
    std::process::exit(flatrank::cli::main_with_args(std::env::args_os()));
}
