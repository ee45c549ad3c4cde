fn main() {
    std::process::exit(mildhjb::cli::run_from(std::env::args_os()));
}
