fn main() {
    std::process::exit(steklov_match::cli::run(std::env::args_os()));
}
