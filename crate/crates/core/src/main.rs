fn main() {
    std::process::exit(traffic_fw::bench::main());
}
