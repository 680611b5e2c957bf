fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(mpdetect::cli::dispatch(&argv));
}
