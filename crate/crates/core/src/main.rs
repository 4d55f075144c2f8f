fn main() {
    std::process::exit(quadtruth::cli::run(std::env::args_os()));
}
