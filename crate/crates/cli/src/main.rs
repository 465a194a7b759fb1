fn main() {
    std::process::exit(irsolve_cli::run(std::env::args_os()));
}
