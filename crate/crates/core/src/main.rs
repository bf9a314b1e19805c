fn main() {
    std::process::exit(lee_lbm::cli::cli_main(std::env::args_os()));
}
