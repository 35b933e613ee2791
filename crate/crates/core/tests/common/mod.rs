//! Reader for the libjpeg reference dumps in `tests/fixtures/corpus/*.ref`
//! (written by `tools/fixtures/refdump.c`).
#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub struct RefTable {
    pub class: u8,
    pub slot: u8,
    pub counts: [u8; 16],
    pub symbols: Vec<u8>,
}

pub struct RefComponent {
    pub id: u8,
    pub h: u8,
    pub v: u8,
    pub tq: u8,
    pub width_in_blocks: usize,
    pub height_in_blocks: usize,
    pub grid_w: usize,
    pub grid_h: usize,
    /// Zigzag-ordered coefficients, `grid_w * grid_h` blocks row-major.
    pub coeffs: Vec<[i16; 64]>,
    pub plane_w: usize,
    pub plane_h: usize,
    pub plane: Vec<u8>,
}

pub struct RefDump {
    pub width: usize,
    pub height: usize,
    pub restart_interval: Option<u16>,
    pub quant: Vec<(u8, [u16; 64])>,
    pub huffman: Vec<RefTable>,
    pub components: Vec<RefComponent>,
}

struct Cur<'a>(&'a [u8], usize);

impl Cur<'_> {
    fn u8(&mut self) -> u8 {
        self.1 += 1;
        self.0[self.1 - 1]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes([self.u8(), self.u8()])
    }
    fn bytes(&mut self, n: usize) -> &[u8] {
        self.1 += n;
        &self.0[self.1 - n..self.1]
    }
}

pub fn read_ref(path: &Path) -> RefDump {
    let data = std::fs::read(path).unwrap();
    let mut c = Cur(&data, 0);
    assert_eq!(c.bytes(4), b"JREF");
    assert_eq!(c.u8(), 1);
    let width = c.u16() as usize;
    let height = c.u16() as usize;
    let ncomp = c.u8() as usize;
    let has_ri = c.u8() != 0;
    let ri = c.u16();
    let nq = c.u8();
    let quant = (0..nq)
        .map(|_| {
            let slot = c.u8();
            let mut v = [0u16; 64];
            v.iter_mut().for_each(|x| *x = c.u16());
            (slot, v)
        })
        .collect();
    let nh = c.u8();
    let huffman = (0..nh)
        .map(|_| {
            let class = c.u8();
            let slot = c.u8();
            let mut counts = [0u8; 16];
            counts.iter_mut().for_each(|x| *x = c.u8());
            let n = c.u16() as usize;
            RefTable { class, slot, counts, symbols: c.bytes(n).to_vec() }
        })
        .collect();
    let mut components: Vec<RefComponent> = (0..ncomp)
        .map(|_| {
            let (id, h, v, tq) = (c.u8(), c.u8(), c.u8(), c.u8());
            let (wib, hib) = (c.u16() as usize, c.u16() as usize);
            let (gw, gh) = (c.u16() as usize, c.u16() as usize);
            let coeffs = (0..gw * gh)
                .map(|_| {
                    let mut b = [0i16; 64];
                    b.iter_mut().for_each(|x| *x = c.u16() as i16);
                    b
                })
                .collect();
            RefComponent {
                id,
                h,
                v,
                tq,
                width_in_blocks: wib,
                height_in_blocks: hib,
                grid_w: gw,
                grid_h: gh,
                coeffs,
                plane_w: 0,
                plane_h: 0,
                plane: Vec::new(),
            }
        })
        .collect();
    for comp in components.iter_mut() {
        comp.plane_w = c.u16() as usize;
        comp.plane_h = c.u16() as usize;
        comp.plane = c.bytes(comp.plane_w * comp.plane_h).to_vec();
    }
    assert_eq!(c.1, data.len(), "trailing bytes in {}", path.display());
    RefDump { width, height, restart_interval: has_ri.then_some(ri), quant, huffman, components }
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// `(jpeg path, reference dump)` for every corpus file, sorted by name.
pub fn corpus() -> Vec<(PathBuf, RefDump)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures_dir().join("corpus"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "jpg"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let r = read_ref(&p.with_extension("ref"));
            (p, r)
        })
        .collect()
}

/// Corpus entries encoded at quality 95 with 4:2:0 sampling.
pub fn is_q95_420(path: &Path, r: &RefDump) -> bool {
    let name = path.file_name().unwrap().to_string_lossy();
    !name.contains("q100") && r.components[0].h == 2 && r.components[0].v == 2
}
