fn main() {
    std::process::exit(isl::cli::run(std::env::args_os()));
}
