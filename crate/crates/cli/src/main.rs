fn main() {
    std::process::exit(blindeq_cli::execute(std::env::args_os()));
}
