fn main() {
    std::process::exit(icnd2d::cli::main_with_args(std::env::args_os()));
}
