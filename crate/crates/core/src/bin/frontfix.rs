fn main() {
    std::process::exit(frontfix::cli::run());
}
