fn main() {
    if let Err(err) = riskprop::cli::run(std::env::args()) {
        if !matches!(err, riskprop::Error::Usage) {
            eprintln!("error: {err}");
        }
        std::process::exit(1);
    }
}
