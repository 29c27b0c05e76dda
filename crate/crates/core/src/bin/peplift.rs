fn main() {
    std::process::exit(peplift::cli::run(std::env::args_os()));
}
