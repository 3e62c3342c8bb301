//! `toy-jpg`: a marker-segment parser with a table-driven decode loop.
//!
//! 1024-byte input: SOI gates, an APP0 segment, a quantization table that
//! is parsed into VM memory, restart markers, then a scan decode that maps
//! each payload nibble through the in-memory table and accumulates. Sixteen
//! scan bytes drive eight running-sum checkpoints.
//!
//! This is the pointer-indexing trap: the decode reads `table[nib]` where
//! `nib` comes from the payload byte. Index tags are dropped at loads, so
//! the rule propagator credits every checkpoint to the table bytes alone
//! and never to the scan payload that selects among them. Four payload
//! bytes also get direct range checks; the other twelve are invisible to
//! rule propagation despite deciding every checkpoint.

use super::{Asm, GtRange, Target};
use crate::ir::{BinOp, Pred};

const M: usize = 1024;
const QT: usize = 0x13;
const QT_LEN: usize = 8;
const HUFF: usize = 0x1b;
const RST: usize = 0x28;
const SCAN: usize = 0x30;
const SCAN_LEN: usize = 16;
const EOI: usize = 0x3fe;

const QT_SEED: [u8; QT_LEN] = [0x11, 0x17, 0x1d, 0x23, 0x29, 0x31, 0x38, 0x3f];
/// Scan bytes: nibbles cover every table entry, keep all eight checkpoint
/// sums under 0x80 at the seed, and leave every position able to push some
/// later checkpoint across the threshold (so each byte stays influential).
const SCAN_SEED: [u8; SCAN_LEN] = [
    0x83, 0x8a, 0x8e, 0x7a, 0x74, 0x31, 0x65, 0x37, 0x51, 0x59, 0xa2, 0x80, 0xaf, 0x4e, 0x85, 0x94,
];

pub fn build() -> Target {
    Target { program: program(), seed: seed(), ground_truth: ground_truth() }
}

fn program() -> crate::ir::MicroProgram {
    let mut a = Asm::new("toy-jpg", M);
    a.b.mem_size(QT_LEN);

    // SOI + APP0.
    let b0 = a.load(0);
    a.gate("jpg.soi0", Pred::Eq, b0, 0xffu64);
    let b1 = a.load(1);
    a.gate("jpg.soi1", Pred::Eq, b1, 0xd8u64);
    let m0 = a.load(2);
    a.check("jpg.app0_mark0", Pred::Eq, m0, 0xffu64);
    let m1 = a.load(3);
    a.check("jpg.app0_mark1", Pred::Eq, m1, 0xe0u64);
    let app_len = a.u16be(0x04);
    a.check("jpg.app0_len", Pred::Eq, app_len, 0x0010u64);
    let packed = a.pack_bytes(0x06, 5);
    a.strcmp_check("jpg.jfif", packed, Asm::pack_const(b"JFIF\0"));
    let j0 = a.load(0x06);
    a.check("jpg.jfif0", Pred::Eq, j0, u64::from(b'J'));
    let units = a.load(0x0b);
    a.check("jpg.units", Pred::Le, units, 2u64);
    let xd = a.u16be(0x0c);
    a.check("jpg.xdensity", Pred::Eq, xd, 0x0048u64);
    let yd = a.u16be(0x0e);
    a.check("jpg.ydensity", Pred::Eq, yd, 0x0060u64);

    // DQT: the table is parsed into memory and range-checked per entry.
    let d0 = a.load(0x10);
    a.check("jpg.dqt_mark0", Pred::Eq, d0, 0xffu64);
    let d1 = a.load(0x11);
    a.check("jpg.dqt_mark1", Pred::Eq, d1, 0xdbu64);
    let prec = a.load(0x12);
    a.check("jpg.dqt_prec", Pred::Lt, prec, 0x40u64);
    for i in 0..QT_LEN {
        let q = a.load((QT + i) as u64);
        a.b.store_mem(i as u64, q);
        a.check(&format!("jpg.qt{i}"), Pred::Lt, q, 0xc0u64);
    }
    for i in 0..4 {
        let h = a.load((HUFF + i) as u64);
        a.check(&format!("jpg.huff{i}"), Pred::Le, h, 8u64);
    }

    // SOS header and frame dimensions.
    let s0 = a.load(0x20);
    a.check("jpg.sos_mark0", Pred::Eq, s0, 0xffu64);
    let s1 = a.load(0x21);
    a.check("jpg.sos_mark1", Pred::Eq, s1, 0xdau64);
    let comp = a.load(0x22);
    a.check("jpg.sos_comp", Pred::Eq, comp, 1u64);
    let w = a.u16be(0x24);
    a.check("jpg.width", Pred::Eq, w, 0x0140u64);
    let h = a.u16be(0x26);
    a.check("jpg.height", Pred::Eq, h, 0x00f0u64);
    for i in 0..3 {
        let ra = a.load((RST + 2 * i) as u64);
        a.check(&format!("jpg.rst{i}a"), Pred::Eq, ra, 0xffu64);
        let rb = a.load((RST + 2 * i + 1) as u64);
        a.check(&format!("jpg.rst{i}b"), Pred::Eq, rb, 0xd0 + i as u64);
    }
    a.require(Pred::Eq, s0, 0xffu64);
    a.require(Pred::Eq, s1, 0xdau64);

    // Scan decode: each payload nibble selects a table entry.
    let acc = a.b.reg();
    a.b.konst(acc, 0);
    let nib = a.b.reg();
    let shifted = a.b.reg();
    let t = a.b.reg();
    let mut ck = 0;
    for k in 0..SCAN_LEN {
        let p = a.load((SCAN + k) as u64);
        a.b.bin(BinOp::And, nib, p, 0x07u64);
        let v = a.b.reg();
        a.b.load_mem(v, nib);
        a.b.bin(BinOp::Shl, shifted, v, (k & 3) as u64);
        a.b.bin(BinOp::Add, acc, acc, shifted);
        if k % 4 == 0 {
            a.check(&format!("jpg.pay{}", k / 4), Pred::Lt, p, 0xc0u64);
        }
        if k % 2 == 1 {
            a.b.bin(BinOp::And, t, acc, 0xffu64);
            a.check(&format!("jpg.acc{ck}"), Pred::Lt, t, 0x80u64);
            ck += 1;
        }
    }

    let e0 = a.load(EOI as u64);
    a.check("jpg.eoi0", Pred::Eq, e0, 0xffu64);
    let e1 = a.load((EOI + 1) as u64);
    a.check("jpg.eoi1", Pred::Eq, e1, 0xd9u64);

    a.finish()
}

fn seed() -> Vec<u8> {
    let mut s = super::patterned(M, 0x77);
    let head: [u8; 0x13] = [
        0xff, 0xd8, // SOI
        0xff, 0xe0, // APP0 marker
        0x00, 0x10, // APP0 length
        b'J', b'F', b'I', b'F', 0x00, // identifier
        0x01, // units
        0x00, 0x48, // xdensity
        0x00, 0x60, // ydensity
        0xff, 0xdb, // DQT marker
        0x00, // precision
    ];
    s[..head.len()].copy_from_slice(&head);
    s[QT..QT + QT_LEN].copy_from_slice(&QT_SEED);
    s[HUFF..HUFF + 4].copy_from_slice(&[1, 2, 3, 4]);
    s[0x20..0x23].copy_from_slice(&[0xff, 0xda, 0x01]);
    s[0x24..0x28].copy_from_slice(&[0x01, 0x40, 0x00, 0xf0]);
    s[RST..RST + 6].copy_from_slice(&[0xff, 0xd0, 0xff, 0xd1, 0xff, 0xd2]);
    s[SCAN..SCAN + SCAN_LEN].copy_from_slice(&SCAN_SEED);
    s[EOI..EOI + 2].copy_from_slice(&[0xff, 0xd9]);
    s
}

fn ground_truth() -> Vec<GtRange> {
    vec![
        GtRange { start: 0x00, end: 0x10, label: "soi_app0" },
        GtRange { start: 0x10, end: QT + QT_LEN, label: "dqt" },
        GtRange { start: HUFF, end: HUFF + 4, label: "huff_counts" },
        GtRange { start: 0x20, end: 0x23, label: "sos" },
        GtRange { start: 0x24, end: 0x28, label: "dimensions" },
        GtRange { start: RST, end: RST + 6, label: "restart_markers" },
        GtRange { start: SCAN, end: SCAN + SCAN_LEN, label: "scan_payload" },
        GtRange { start: EOI, end: EOI + 2, label: "eoi" },
    ]
}
