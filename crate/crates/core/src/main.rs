fn main() {
    std::process::exit(leafwise::cli::run(std::env::args_os()));
}
