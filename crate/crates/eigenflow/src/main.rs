fn main() {
    std::process::exit(eigenflow::cli::main_entry());
}
