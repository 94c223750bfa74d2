fn main() {
    std::process::exit(calabi::cli::run(std::env::args()));
}
