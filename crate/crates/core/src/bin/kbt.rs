fn main() {
    std::process::exit(kbt::cli::main_entry());
}
