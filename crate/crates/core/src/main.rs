fn main() {
    std::process::exit(scr_dynpredict::cli::run(std::env::args_os()));
}
