//! `toy-zip`: an archive header parser with a shift-register decode loop.
//!
//! 1024-byte input. Unusually, the decode loop runs *first* and is never
//! gated, so its 28 sinks are reached on every input; header and trailer
//! checks follow. Sink order: decode (0..28), local header (28..46), name
//! (46..48), central-directory trailer (48..54).
//!
//! The decode loop is the overtaint showcase: each iteration ORs two fresh
//! window bytes into a hold register, extracts `dist = hold & 0xff` (which
//! is exactly the iteration's first byte), checks it twice, then shifts the
//! hold down. Value-wise the register is clean each iteration; tag-wise the
//! rule propagator drags every window byte seen so far into every later
//! `dist` check. The designated comparison sink is `zip.dist.13`, whose
//! true dependency is two bytes but whose rule tag set is the whole window.

use super::{Asm, GtRange, Target};
use crate::ir::{BinOp, Pred};

const M: usize = 1024;
const WINDOW: usize = 0x40;
const ITERS: usize = 14;
const NAME: usize = 0x20;
const TRAILER: usize = 0x3f0;

/// First byte of each decode pair; must satisfy dmax < b < 0xC0 at seed.
const DIST_SEED: [u8; ITERS] =
    [0x9b, 0xa7, 0x93, 0xb2, 0x88, 0xbe, 0x91, 0xa2, 0xb7, 0x8a, 0xad, 0x96, 0xb9, 0x8f];

pub fn build() -> Target {
    Target { program: program(), seed: seed(), ground_truth: ground_truth() }
}

fn program() -> crate::ir::MicroProgram {
    let mut a = Asm::new("toy-zip", M);

    // Decode loop, ungated. dmax is the parsed distance limit.
    let dmax = a.load(0x10);
    let hold = a.b.reg();
    a.b.konst(hold, 0);
    let shifted = a.b.reg();
    let dist = a.b.reg();
    for k in 0..ITERS {
        let b0 = a.load((WINDOW + 2 * k) as u64);
        let b1 = a.load((WINDOW + 2 * k + 1) as u64);
        a.b.bin(BinOp::Or, hold, hold, b0);
        a.b.bin(BinOp::Shl, shifted, b1, 8u64);
        a.b.bin(BinOp::Or, hold, hold, shifted);
        a.b.bin(BinOp::And, dist, hold, 0xffu64);
        a.check(&format!("zip.dist.{k}"), Pred::Gt, dist, dmax);
        a.check(&format!("zip.near.{k}"), Pred::Lt, dist, 0xc0u64);
        a.b.bin(BinOp::Shr, hold, hold, 16u64);
    }

    // Local file header.
    let sig = [0x50u64, 0x4b, 0x03, 0x04];
    for (i, &sb) in sig.iter().enumerate() {
        let r = a.load(i as u64);
        a.gate(&format!("zip.sig{i}"), Pred::Eq, r, sb);
    }
    let version = a.load(0x04);
    a.check("zip.version", Pred::Lt, version, 0x40u64);
    let gpflags = a.load(0x05);
    a.check("zip.gpflags", Pred::Lt, gpflags, 0x80u64);
    let method = a.load(0x06);
    a.check("zip.method", Pred::Eq, method, 8u64);
    let method_hi = a.load(0x07);
    a.check("zip.method_hi", Pred::Eq, method_hi, 0u64);
    let mtime = a.u16le(0x08);
    a.check("zip.mtime", Pred::Eq, mtime, 0x6cb3u64);
    let crc = a.u16le(0x0a);
    a.check("zip.crc", Pred::Eq, crc, 0x9fa2u64);
    let name_len = a.load(0x0c);
    a.check("zip.name_len", Pred::Eq, name_len, 8u64);
    let extra_len = a.load(0x0d);
    a.check("zip.extra_len", Pred::Le, extra_len, 16u64);
    let comp = a.u16le(0x0e);
    a.check("zip.comp_size", Pred::Eq, comp, 0x001cu64);
    a.check("zip.dmax", Pred::Lt, dmax, 0xc0u64);
    let op = a.load(0x11);
    a.check("zip.op", Pred::Ge, op, 0x40u64);
    let uncomp = a.u16le(0x12);
    a.check("zip.uncomp_size", Pred::Eq, uncomp, 0x0038u64);
    let disk = a.load(0x14);
    a.check("zip.disk_attr", Pred::Lt, disk, 0x80u64);
    let internal = a.load(0x15);
    a.check("zip.internal_attr", Pred::Ge, internal, 0x40u64);

    // Stored name, compared through the opaque helper.
    let packed = a.pack_bytes(NAME as u64, 8);
    a.strcmp_check("zip.name", packed, Asm::pack_const(b"doc.txt\0"));
    let name0 = a.load(NAME as u64);
    a.check("zip.name0", Pred::Eq, name0, u64::from(b'd'));

    // Central-directory stub, only consulted for deflate entries.
    a.require(Pred::Eq, method, 8u64);
    let cd_sig = [0x50u64, 0x4b, 0x01, 0x02];
    for (i, &sb) in cd_sig.iter().enumerate() {
        let r = a.load((TRAILER + i) as u64);
        a.check(&format!("zip.cd_sig{i}"), Pred::Eq, r, sb);
    }
    let entries = a.load((TRAILER + 4) as u64);
    a.check("zip.cd_entries", Pred::Eq, entries, 1u64);
    let comment_len = a.load((TRAILER + 5) as u64);
    a.check("zip.comment_len", Pred::Le, comment_len, 16u64);

    a.finish()
}

fn seed() -> Vec<u8> {
    let mut s = super::patterned(M, 0x3c);
    let header: [u8; 0x16] = [
        0x50, 0x4b, 0x03, 0x04, // signature
        0x14, 0x06, 0x08, 0x00, // version, gpflags, method, method_hi
        0xb3, 0x6c, // mtime
        0xa2, 0x9f, // crc
        0x08, 0x04, // name_len, extra_len
        0x1c, 0x00, // comp_size
        0x85, 0x80, // dmax, op
        0x38, 0x00, // uncomp_size
        0x21, 0x77, // disk_attr, internal_attr
    ];
    s[..header.len()].copy_from_slice(&header);
    s[NAME..NAME + 8].copy_from_slice(b"doc.txt\0");
    for (k, &b0) in DIST_SEED.iter().enumerate() {
        s[WINDOW + 2 * k] = b0;
        // Odd bytes are decoded past but never decide anything.
    }
    s[TRAILER..TRAILER + 6].copy_from_slice(&[0x50, 0x4b, 0x01, 0x02, 0x01, 0x02]);
    s
}

fn ground_truth() -> Vec<GtRange> {
    let mut gt = vec![GtRange { start: 0x00, end: 0x16, label: "header" }];
    gt.push(GtRange { start: NAME, end: NAME + 8, label: "name" });
    for k in 0..ITERS {
        gt.push(GtRange {
            start: WINDOW + 2 * k,
            end: WINDOW + 2 * k + 1,
            label: "dist_byte",
        });
    }
    gt.push(GtRange { start: TRAILER, end: TRAILER + 6, label: "central_dir" });
    gt
}
