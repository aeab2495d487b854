fn main() {
    std::process::exit(gdod::cli::main());
}
