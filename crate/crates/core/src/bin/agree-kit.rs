fn main() {
    std::process::exit(agree_kit::cli::main_with(std::env::args_os()));
}
