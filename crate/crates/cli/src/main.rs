fn main() {
    std::process::exit(spin_dce_cli::cli::run(std::env::args_os()));
}
