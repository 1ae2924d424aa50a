fn main() {
    std::process::exit(mcaoi_cli::run());
}
