fn main() {
    if let Err(e) = autosize_nnlm::cli::run(std::env::args_os()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
