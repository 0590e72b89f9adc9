fn main() {
    std::process::exit(pow3r::cli::run());
}
