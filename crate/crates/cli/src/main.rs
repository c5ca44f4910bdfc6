fn main() {
    std::process::exit(dtsnsim::app::main_with(std::env::args_os()));
}
