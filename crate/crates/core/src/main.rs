fn main() {
    std::process::exit(jtprop::cli::main());
}
