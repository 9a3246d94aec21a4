fn main() {
    std::process::exit(rtgrowth::cli::main_with_args(std::env::args_os()));
}
