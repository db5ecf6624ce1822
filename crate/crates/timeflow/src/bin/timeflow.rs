fn main() {
    std::process::exit(timeflow::cli::run(std::env::args_os()));
}
