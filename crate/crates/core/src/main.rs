fn main() {
    std::process::exit(omnivqa::cli::main_with_args(std::env::args_os()));
}
