fn main() {
    std::process::exit(gradmatch_cli::main_with_args(std::env::args_os()));
}
