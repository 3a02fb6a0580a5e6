fn main() {
    std::process::exit(fairlist::cli::run(std::env::args_os()));
}
