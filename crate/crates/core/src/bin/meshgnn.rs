fn main() {
    std::process::exit(meshgnn::cli::run(std::env::args_os()));
}
