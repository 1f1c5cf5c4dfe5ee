fn main() {
    std::process::exit(subsidy_mte::cli::run(std::env::args_os()));
}
