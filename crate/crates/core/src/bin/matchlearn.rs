fn main() {
    std::process::exit(matchlearn::harness::cli_main(std::env::args_os()));
}
