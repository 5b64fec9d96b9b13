fn main() {
    std::process::exit(madcnn::cli::run(std::env::args_os()));
}
