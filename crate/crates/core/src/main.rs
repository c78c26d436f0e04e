fn main() {
    std::process::exit(mkpoe::cli::main_with_args(std::env::args_os()));
}
