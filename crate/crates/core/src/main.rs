fn main() {
    std::process::exit(homfem::run_cli());
}
