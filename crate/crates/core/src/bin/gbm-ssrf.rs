fn main() {
    std::process::exit(gbm_ssrf::cli::main_entry());
}
