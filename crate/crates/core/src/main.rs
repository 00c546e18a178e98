fn main() {
    std::process::exit(sphere_qm::cli::run(std::env::args_os()));
}
