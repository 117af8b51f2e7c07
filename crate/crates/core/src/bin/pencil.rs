fn main() {
    std::process::exit(pencil::cli::main_exit_code());
}
