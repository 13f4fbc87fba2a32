fn main() {
    std::process::exit(chanpred_cli::run(std::env::args_os()));
}
