fn main() {
    std::process::exit(ricci_bounds::cli::main());
}
