fn main() {
    std::process::exit(coldspin::cli::main_with_args(std::env::args_os()));
}
