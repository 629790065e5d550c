fn main() {
    std::process::exit(drams::cli::run(std::env::args_os()));
}
