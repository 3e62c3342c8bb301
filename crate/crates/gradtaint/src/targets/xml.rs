//! `toy-xml`: a fixed-slot markup parser with control-dependent tag kinds.
//!
//! 1024-byte input: a prolog, four element slots at fixed offsets, and a
//! closing trailer. Each slot is gated on its own `<`; a missing bracket
//! skips that slot only, so slots are independent.
//!
//! Slots 1 and 3 are closing tags: the byte after `<` selects the element
//! kind by *control flow* — a branch on `== '/'` assigns a constant kind
//! code, and the kind is then checked. No data ever flows from the byte to
//! the kind register, so rule propagation reports nothing for the
//! `xml.slot{1,3}.closing` sinks even though the byte fully decides them.

use super::{Asm, GtRange, Target};
use crate::ir::Pred;

const M: usize = 1024;
const SLOTS: [usize; 4] = [0x40, 0x80, 0xc0, 0x100];
const TRAILER: usize = 0x3f0;
const KIND_OPEN: u64 = 1;
const KIND_CLOSING: u64 = 2;

pub fn build() -> Target {
    Target { program: program(), seed: seed(), ground_truth: ground_truth() }
}

fn slot_name(s: usize) -> [u8; 4] {
    [b'n', b'd', b'0' + s as u8, 0]
}

fn program() -> crate::ir::MicroProgram {
    let mut a = Asm::new("toy-xml", M);

    // Prolog.
    let prolog = b"<?xml";
    for (i, &pb) in prolog.iter().enumerate() {
        let r = a.load(i as u64);
        a.gate(&format!("xml.prolog{i}"), Pred::Eq, r, u64::from(pb));
    }
    let sp = a.load(5);
    a.check("xml.space", Pred::Eq, sp, u64::from(b' '));
    for (i, &vb) in b"1.0".iter().enumerate() {
        let r = a.load(6 + i as u64);
        a.check(&format!("xml.ver{i}"), Pred::Eq, r, u64::from(vb));
    }

    // Element slots.
    let slot_end: Vec<_> = SLOTS.iter().map(|_| a.b.label()).collect();
    for (s, &base) in SLOTS.iter().enumerate() {
        let lt = a.load(base as u64);
        a.gate_to(&format!("xml.slot{s}.open"), Pred::Eq, lt, u64::from(b'<'), slot_end[s]);
        if s % 2 == 1 {
            // Closing tag: the kind is decided by control flow only.
            let mark = a.load((base + 1) as u64);
            let kind = a.b.reg();
            let yes = a.b.label();
            let no = a.b.label();
            let done = a.b.label();
            a.b.cmp_branch(Pred::Eq, mark, u64::from(b'/'), None, yes, no);
            a.b.place(yes);
            a.b.konst(kind, KIND_CLOSING);
            a.b.jmp(done);
            a.b.place(no);
            a.b.konst(kind, KIND_OPEN);
            a.b.jmp(done);
            a.b.place(done);
            a.check(&format!("xml.slot{s}.closing"), Pred::Eq, kind, KIND_CLOSING);
        }
        let packed = a.pack_bytes((base + 2) as u64, 4);
        a.strcmp_check(&format!("xml.slot{s}.name"), packed, Asm::pack_const(&slot_name(s)));
        let first = a.load((base + 2) as u64);
        a.check(&format!("xml.slot{s}.letter"), Pred::Ge, first, 0x40u64);
        let close = a.load((base + 6) as u64);
        a.check(&format!("xml.slot{s}.gt"), Pred::Eq, close, u64::from(b'>'));
        let attrs = a.load((base + 7) as u64);
        a.check(&format!("xml.slot{s}.attrs"), Pred::Le, attrs, 4u64);
        let key = a.load((base + 8) as u64);
        a.check(&format!("xml.slot{s}.akey"), Pred::Ge, key, 0x40u64);
        let eqs = a.load((base + 9) as u64);
        a.check(&format!("xml.slot{s}.aeq"), Pred::Eq, eqs, u64::from(b'='));
        let quote = a.load((base + 10) as u64);
        a.check(&format!("xml.slot{s}.aquote"), Pred::Eq, quote, u64::from(b'"'));
        let val = a.load((base + 11) as u64);
        a.check(&format!("xml.slot{s}.aval"), Pred::Lt, val, 0xc0u64);
        a.b.place(slot_end[s]);
    }

    // Trailer.
    for (i, &tb) in b"</r".iter().enumerate() {
        let r = a.load((TRAILER + i) as u64);
        a.check(&format!("xml.trail{i}"), Pred::Eq, r, u64::from(tb));
    }

    a.finish()
}

fn seed() -> Vec<u8> {
    let mut s = super::patterned(M, 0x5e);
    s[..9].copy_from_slice(b"<?xml 1.0");
    for (i, &base) in SLOTS.iter().enumerate() {
        s[base] = b'<';
        s[base + 1] = if i % 2 == 1 { b'/' } else { b'x' };
        s[base + 2..base + 6].copy_from_slice(&slot_name(i));
        s[base + 6] = b'>';
        s[base + 7] = 1;
        s[base + 8] = b'k';
        s[base + 9] = b'=';
        s[base + 10] = b'"';
        s[base + 11] = 0x35;
    }
    s[TRAILER..TRAILER + 3].copy_from_slice(b"</r");
    s
}

fn ground_truth() -> Vec<GtRange> {
    let mut gt = vec![GtRange { start: 0, end: 9, label: "prolog" }];
    for (i, &base) in SLOTS.iter().enumerate() {
        if i % 2 == 1 {
            gt.push(GtRange { start: base, end: base + 12, label: "closing_slot" });
        } else {
            gt.push(GtRange { start: base, end: base + 1, label: "open_bracket" });
            gt.push(GtRange { start: base + 2, end: base + 12, label: "open_slot" });
        }
    }
    gt.push(GtRange { start: TRAILER, end: TRAILER + 3, label: "trailer" });
    gt
}
