fn main() {
    std::process::exit(swarmzones::cli::main_with(std::env::args_os()));
}
