fn main() {
    std::process::exit(mtp::cli::main());
}
