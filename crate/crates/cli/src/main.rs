fn main() {
    std::process::exit(inrecon_cli::run(std::env::args_os()));
}
