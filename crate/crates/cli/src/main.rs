fn main() {
    std::process::exit(sylkrylov_cli::run(std::env::args_os()));
}
