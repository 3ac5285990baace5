fn main() {
    std::process::exit(cvsteer::cli::main_entry());
}
