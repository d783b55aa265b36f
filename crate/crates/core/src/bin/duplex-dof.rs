fn main() {
    std::process::exit(duplex_dof::cli::run(std::env::args_os()));
}
