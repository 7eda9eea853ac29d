fn main() {
    // Command-line interface is wired up in cli.rs once the analysis
    // pipeline exists.
}
