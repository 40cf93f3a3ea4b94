fn main() {
    std::process::exit(balanced_cli::run(std::env::args_os()));
}
