fn main() {
    std::process::exit(camflow_cli::run(std::env::args_os()));
}
