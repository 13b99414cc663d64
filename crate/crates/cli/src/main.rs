fn main() {
    std::process::exit(radpair_cli::main_with_args(std::env::args_os()));
}
