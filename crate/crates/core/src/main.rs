fn main() {
    std::process::exit(coordetect::cli::run(std::env::args_os()));
}
