fn main() {
    std::process::exit(spinnet::cli::run(std::env::args_os()));
}
