fn main() {
    std::process::exit(adm::cli::run(std::env::args_os()));
}
