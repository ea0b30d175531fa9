fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(kgfraud::cli::main_with_args(&args));
}
