fn main() {
    std::process::exit(resdecomp::cli::main_with_args(std::env::args_os()));
}
