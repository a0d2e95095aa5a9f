fn main() {
    std::process::exit(rankic::cli::main_with_args(std::env::args_os()));
}
