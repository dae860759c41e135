fn main() {
    std::process::exit(ucgm::cli::main_with_args(std::env::args_os()));
}
