fn main() { println!("leakstack"); }
