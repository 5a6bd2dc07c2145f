fn main() {
    std::process::exit(coopkg::cli::run(std::env::args_os()));
}
