fn main() {
    std::process::exit(antisync_cli::main_with_args(std::env::args_os()));
}
