fn main() {
    std::process::exit(ccsr_core::cli::run());
}
