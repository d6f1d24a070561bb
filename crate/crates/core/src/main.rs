fn main() {
    std::process::exit(htps::cli::run(std::env::args_os()));
}
