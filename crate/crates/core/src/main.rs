fn main() {
    std::process::exit(mgcn::cli::run(std::env::args_os()));
}
