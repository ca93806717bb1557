fn main() {
    eprintln!("blendqc: command-line interface not wired up yet");
    std::process::exit(2);
}
