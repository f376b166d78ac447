fn main() {
    std::process::exit(mfsr::cli::main_with(std::env::args_os()));
}
