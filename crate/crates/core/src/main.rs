fn main() {
    std::process::exit(hessquot::cli::run(std::env::args_os()));
}
