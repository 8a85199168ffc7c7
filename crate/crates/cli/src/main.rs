fn main() {
    std::process::exit(ringfringe_cli::run(std::env::args_os()));
}
