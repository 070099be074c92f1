fn main() {
    std::process::exit(delineate::cli::run(std::env::args_os()));
}
