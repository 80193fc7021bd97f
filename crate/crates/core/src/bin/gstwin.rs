fn main() {
    std::process::exit(gstwin::cli::main_with_args(std::env::args_os()));
}
