fn main() {
    std::process::exit(kreach::cli::run());
}
