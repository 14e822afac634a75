fn main() {
    std::process::exit(snapsci::cli::main_with_args(std::env::args_os()));
}
