fn main() {
    std::process::exit(ocmdp::cli::run(std::env::args_os()));
}
