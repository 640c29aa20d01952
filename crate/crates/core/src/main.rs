fn main() {
    std::process::exit(retext::cli::run(std::env::args_os()));
}
