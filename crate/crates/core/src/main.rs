fn main() {
    std::process::exit(berger_lab::cli::main_with(std::env::args_os()));
}
