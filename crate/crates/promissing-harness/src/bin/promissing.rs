fn main() {
    std::process::exit(promissing_harness::cli::run_cli(std::env::args_os()));
}
