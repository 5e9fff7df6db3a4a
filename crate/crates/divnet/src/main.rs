fn main() {
    std::process::exit(divnet::cli::main_with_args(std::env::args_os()));
}
