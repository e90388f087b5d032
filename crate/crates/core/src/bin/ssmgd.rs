fn main() {
    std::process::exit(ssmgd_core::lab::cli::cli(std::env::args_os()));
}
