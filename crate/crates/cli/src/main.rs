fn main() {
    std::process::exit(cascade_lab::run(std::env::args_os()));
}
