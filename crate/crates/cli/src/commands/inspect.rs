use std::path::Path;

use jpegclass::{decode_scan, parse_jpeg, ImageGeometry, ParsedJpeg};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// Marker listing, tables and geometry; with `coeffs`, every block's
/// quantized coefficients in zigzag order.
pub fn inspect(path: &Path, coeffs: bool) -> CliResult<Value> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let parsed = parse_jpeg(&bytes)?;
    let mut report = describe(&parsed);
    report["file"] = json!(path.display().to_string());
    if coeffs {
        let (grid, _) = decode_scan(&parsed)?;
        let comps: Vec<Value> = grid
            .components
            .iter()
            .enumerate()
            .map(|(c, g)| {
                let blocks: Vec<Value> = g
                    .blocks
                    .iter()
                    .zip(&g.spans)
                    .map(|(b, s)| {
                        json!({
                            "gridX": b.grid_x,
                            "gridY": b.grid_y,
                            "coeffs": b.coeffs.to_vec(),
                            "bitSpan": [s.start_bit, s.end_bit],
                            "explicitEob": s.has_explicit_eob,
                        })
                    })
                    .collect();
                json!({ "component": c, "gridW": g.grid_w, "gridH": g.grid_h, "blocks": blocks })
            })
            .collect();
        report["coefficients"] = Value::Array(comps);
    }
    Ok(report)
}

fn describe(p: &ParsedJpeg) -> Value {
    let geometry = ImageGeometry::from_frame(&p.frame);
    json!({
        "markers": p.segments.iter().map(|s| json!({
            "marker": format!("0x{:02X}", s.marker),
            "name": s.name,
            "offset": s.offset,
            "length": s.length,
        })).collect::<Vec<_>>(),
        "frame": {
            "precision": p.frame.precision,
            "width": p.frame.width,
            "height": p.frame.height,
            "components": p.frame.components.iter().enumerate().map(|(c, fc)| {
                let (gw, gh) = p.frame.grid_dims(c);
                json!({
                    "id": fc.id,
                    "hSampling": fc.h_sampling,
                    "vSampling": fc.v_sampling,
                    "quantTable": fc.quant_table_id,
                    "gridW": gw,
                    "gridH": gh,
                })
            }).collect::<Vec<_>>(),
        },
        "geometry": {
            "dW0": geometry.d_w0, "dH0": geometry.d_h0,
            "dW1": geometry.d_w1, "dH1": geometry.d_h1,
            "dW2": geometry.d_w2, "dH2": geometry.d_h2,
        },
        "quantTables": p.quant_tables.iter().flatten().map(|q| json!({
            "id": q.id,
            "precision": q.precision,
            "values": q.values.to_vec(),
        })).collect::<Vec<_>>(),
        "huffmanTables": p.dc_tables.iter().chain(&p.ac_tables).flatten().map(|h| json!({
            "class": format!("{:?}", h.class).to_lowercase(),
            "id": h.id,
            "counts": h.counts.to_vec(),
            "symbols": h.symbols,
        })).collect::<Vec<_>>(),
        "restartInterval": p.restart_interval,
        "scanBytes": p.scan_bytes.len(),
        "appSegments": p.opaque.len(),
    })
}

pub fn render_text(v: &Value) -> String {
    let mut s = String::new();
    let f = &v["frame"];
    s.push_str(&format!("{}: {}x{} baseline, {} components\n", v["file"].as_str().unwrap_or(""), f["width"], f["height"], f["components"].as_array().map_or(0, Vec::len)));
    for c in f["components"].as_array().into_iter().flatten() {
        s.push_str(&format!(
            "  component {}: sampling {}x{}, quant table {}, grid {}x{}\n",
            c["id"], c["hSampling"], c["vSampling"], c["quantTable"], c["gridW"], c["gridH"]
        ));
    }
    s.push_str(&format!(
        "  {} quant tables, {} huffman tables, restart interval {}, {} scan bytes\n",
        v["quantTables"].as_array().map_or(0, Vec::len),
        v["huffmanTables"].as_array().map_or(0, Vec::len),
        v["restartInterval"],
        v["scanBytes"]
    ));
    s.push_str("  markers:");
    for m in v["markers"].as_array().into_iter().flatten() {
        s.push_str(&format!(" {}@{}", m["name"].as_str().unwrap_or("?"), m["offset"]));
    }
    s.push('\n');
    s
}
