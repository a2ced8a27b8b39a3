fn main() {
    std::process::exit(wavecnet::cli::run_cli(std::env::args_os()));
}
