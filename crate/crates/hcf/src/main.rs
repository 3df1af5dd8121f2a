fn main() {
    std::process::exit(hcf::cli::run());
}
