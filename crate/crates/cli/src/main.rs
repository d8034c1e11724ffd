fn main() {
    std::process::exit(emissionscope_cli::run(std::env::args_os().skip(1)));
}
