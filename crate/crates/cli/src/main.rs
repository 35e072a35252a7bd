fn main() {
    std::process::exit(qfluct_cli::main_with(std::env::args_os()));
}
