fn main() {
    std::process::exit(anglestab::cli::run(std::env::args_os()));
}
