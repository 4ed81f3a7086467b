fn main() {
    std::process::exit(faceparse_cli::run(std::env::args_os()));
}
