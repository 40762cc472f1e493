fn main() {
    std::process::exit(trignet::cli::run(std::env::args_os()));
}
