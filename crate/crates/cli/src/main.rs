fn main() {
    std::process::exit(ossify_cli::cli_main(std::env::args_os()));
}
