fn main() {
    std::process::exit(themis::app::main_with(std::env::args_os()));
}
