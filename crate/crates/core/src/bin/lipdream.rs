fn main() {
    std::process::exit(lipdream::cli::main_from(std::env::args_os()));
}
