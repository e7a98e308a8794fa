fn main() {
    std::process::exit(ludolog::cli::run());
}
