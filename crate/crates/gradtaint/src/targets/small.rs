//! Small targets: the scalar-sink parser and the composition example.

use super::{Asm, GtRange, Target};
use crate::ir::{BinOp, Pred};

/// `vuln-len`: a 256-byte record whose header carries a length word and a
/// divisor byte. The interesting sinks are scalars — the parsed length,
/// the raw denominator, and the quotient of the two — mimicking the
/// length-overflow and divide-by-zero shapes that motivate scalar sink
/// tracking. Division by zero yields 0 in the VM, so the quotient sink is
/// total.
pub fn build_vuln_len() -> Target {
    let mut a = Asm::new("vuln-len", 256);
    for (i, &mb) in b"VLEN".iter().enumerate() {
        let r = a.load(i as u64);
        a.gate(&format!("vl.magic{i}"), Pred::Eq, r, u64::from(mb));
    }
    let length = a.u16le(0x04);
    let s_len = a.b.scalar_sink("vl.length");
    a.b.sink_scalar(s_len, length);
    let version = a.load(0x06);
    a.check("vl.version", Pred::Le, version, 4u64);
    let flags = a.load(0x07);
    a.check("vl.flags", Pred::Lt, flags, 0x80u64);
    let denom = a.load(0x08);
    let s_den = a.b.scalar_sink("vl.denominator");
    a.b.sink_scalar(s_den, denom);
    let quot = a.b.reg();
    a.b.bin(BinOp::Div, quot, length, denom);
    let s_quot = a.b.scalar_sink("vl.quotient");
    a.b.sink_scalar(s_quot, quot);
    let program = a.finish();

    let mut seed = super::patterned(256, 0x19);
    seed[..9].copy_from_slice(&[b'V', b'L', b'E', b'N', 0x00, 0x02, 0x02, 0x15, 0x08]);

    let ground_truth = vec![
        GtRange { start: 0x00, end: 0x04, label: "magic" },
        GtRange { start: 0x04, end: 0x06, label: "length" },
        GtRange { start: 0x06, end: 0x08, label: "version_flags" },
        GtRange { start: 0x08, end: 0x09, label: "denominator" },
    ];
    Target { program, seed, ground_truth }
}

/// `compose`: six input bytes, one scalar sink computing `a*a + b - b`.
/// Byte 0 decides the sink; byte 1 flows into it syntactically but cancels
/// out, so rule propagation tags it while no value change can ever reach
/// the sink. The canonical example where gradients rank influence and tag
/// sets cannot.
pub fn build_compose() -> Target {
    let mut a = Asm::new("compose", 6);
    let ra = a.load(0);
    let rb = a.load(1);
    let sq = a.b.reg();
    a.b.bin(BinOp::Mul, sq, ra, ra);
    let sum = a.b.reg();
    a.b.bin(BinOp::Add, sum, sq, rb);
    let z = a.b.reg();
    a.b.bin(BinOp::Sub, z, sum, rb);
    let s = a.b.scalar_sink("compose.z");
    a.b.sink_scalar(s, z);
    let program = a.finish();

    let seed = vec![7, 3, 0, 0, 0, 0];
    let ground_truth = vec![GtRange { start: 0, end: 1, label: "a" }];
    Target { program, seed, ground_truth }
}
