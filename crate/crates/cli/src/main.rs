fn main() {
    std::process::exit(pinnbias_cli::run(std::env::args_os()));
}
