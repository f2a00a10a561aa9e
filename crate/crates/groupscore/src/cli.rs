//! Command-line entry point. Placeholder while the pipeline lands.

pub fn main() -> i32 {
    eprintln!("not yet wired");
    2
}
