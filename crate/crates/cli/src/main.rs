fn main() {
    std::process::exit(foliflow_cli::main_with_args(std::env::args_os()));
}
