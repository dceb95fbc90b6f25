fn main() {
    std::process::exit(fbis::cli::run(std::env::args_os()));
}
