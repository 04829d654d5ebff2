fn main() {
    std::process::exit(perfloop::runner::cli_main(std::env::args()));
}
