fn main() {
    std::process::exit(webgeo::run(std::env::args_os()));
}
