fn main() {
    std::process::exit(fracspec_cli::dispatch(std::env::args_os()));
}
