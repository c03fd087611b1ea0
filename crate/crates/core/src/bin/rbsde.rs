fn main() {
    std::process::exit(rbsde_lab::harness::cli::run(std::env::args_os()));
}
