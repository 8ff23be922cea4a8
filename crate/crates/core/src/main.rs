fn main() {
    std::process::exit(memcap::cli::run(std::env::args_os()));
}
