fn main() {
    std::process::exit(triqsvm::cli::run());
}
