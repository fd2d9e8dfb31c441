fn main() {
    std::process::exit(paneitz_cli::cli_main(std::env::args_os()));
}
