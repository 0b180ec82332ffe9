fn main() {
    std::process::exit(dlfs::cli::run(std::env::args_os()));
}
