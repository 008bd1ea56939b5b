fn main() {
    std::process::exit(fibervitals::cli::run(std::env::args_os()));
}
