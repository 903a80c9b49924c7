fn main() {
    std::process::exit(gbm_cli::parse_and_dispatch(std::env::args_os()));
}
