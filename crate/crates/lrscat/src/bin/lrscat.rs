fn main() {
    std::process::exit(lrscat::cli::run(std::env::args_os()));
}
