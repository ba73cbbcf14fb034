fn main() {
    std::process::exit(memsolve_cli::run(std::env::args_os()));
}
