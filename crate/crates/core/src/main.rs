fn main() {
    std::process::exit(evofam::cli::main_with_args(std::env::args_os()));
}
