fn main() {
    std::process::exit(polycert_cli::main_with_args(std::env::args_os()));
}
