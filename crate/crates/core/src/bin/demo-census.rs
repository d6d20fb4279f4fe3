fn main() {
    std::process::exit(demo_census::cli::main_with(std::env::args_os()));
}
