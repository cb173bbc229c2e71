fn main() {
    std::process::exit(wsn_detect::cli::main_with_args(std::env::args_os()));
}
