fn main() {
    std::process::exit(rql::cli::run(std::env::args_os()));
}
