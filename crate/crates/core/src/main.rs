fn main() {
    std::process::exit(cylmodes::cli::run(std::env::args_os()));
}
