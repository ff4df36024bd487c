//! Writes the demo fixture instance to fixtures/demo.json.

use std::path::Path;

fn main() {
    let out = Path::new("fixtures/demo.json");
    ecomatch::workbench::save_instance(out, &ecomatch::fixtures::demo_instance()).unwrap();
    println!("wrote {}", out.display());
}
