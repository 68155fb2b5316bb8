//! Rotated glyph benchmark: one procedural object seen in every rotation
//! domain, drawn as ASCII art.
//!
//! `cargo run --release --example rotated_glyphs`

use cmdg::data::{generate_glyphs, GlyphConfig};

fn ascii(img: &[f64], grid: usize) -> Vec<String> {
    const SHADES: [char; 5] = [' ', '.', ':', 'o', '#'];
    img.chunks(grid)
        .map(|row| {
            row.iter()
                .map(|&v| SHADES[((v.clamp(0.0, 1.0) * 4.0).round()) as usize])
                .collect()
        })
        .collect()
}

fn main() -> cmdg::Result<()> {
    let cfg = GlyphConfig {
        angles: vec![0.0, 30.0, 60.0, 90.0],
        samples_per_domain: 50,
        ..Default::default()
    };
    let ds = generate_glyphs(&cfg)?;
    println!(
        "{} domains, {} classes, {} objects each, {} pixels per image",
        ds.num_domains(),
        ds.num_classes,
        ds.domains[0].len(),
        ds.input_dim()
    );

    // object 3 in every domain, side by side
    let object = 3;
    let panels: Vec<Vec<String>> = ds
        .domains
        .iter()
        .map(|d| {
            let i = d
                .object_ids
                .iter()
                .position(|&id| id == object)
                .expect("every object appears in every domain");
            ascii(d.x.row(i), cfg.grid)
        })
        .collect();
    let header: Vec<String> = ds
        .domains
        .iter()
        .map(|d| format!("{:<width$}", d.name, width = cfg.grid))
        .collect();
    println!("{}", header.join("  "));
    for r in 0..cfg.grid {
        let line: Vec<&str> = panels.iter().map(|p| p[r].as_str()).collect();
        println!("{}", line.join("  "));
    }
    Ok(())
}
