//! `toy-elf`: a miniature executable-header parser.
//!
//! 1024-byte input. Parse stages, in sink order:
//!
//! 1. ident block — magic gates, class/endian/version/ABI, type and machine
//!    words (sinks 0..10);
//! 2. layout block — counts, table offset, flag bytes (sinks 10..20);
//! 3. section table — three 8-byte entries at a *computed* offset, each
//!    gated on its type byte (sinks 20..44);
//! 4. deep checks — section-name compare through `strcmp`, a rolling
//!    checksum window, and a trailer byte (sinks 44..50).
//!
//! Every gate aborts to END, so the reached sinks always form a prefix of
//! the declaration order; coverage strata cut at sinks 10/20/30/40/50.
//!
//! Deliberate rule-DTA traps: the section table is addressed through the
//! parsed `shoff` field (index tags are dropped at loads, so `shoff`'s low
//! byte is invisible to propagation), the name check routes through an
//! opaque call (tags laundered), and the checksum window drags all 24
//! window bytes through a shift register even though each checkpoint
//! compares only the most recent byte (overtaint).

use super::{Asm, GtRange, Target};
use crate::ir::{BinOp, Pred, RegId};

const M: usize = 1024;
const SHOFF: usize = 0x40;
const STRTAB: usize = 0x60;
const CSUM: usize = 0x80;
const CSUM_LEN: usize = 24;
const TRAILER: usize = M - 1;

/// (type, name_off, off_lo, off_hi, size, flags, align, link) per entry.
const ENTRIES: [[u8; 8]; 3] = [
    [1, 0x00, 0x60, 0, 0x20, 0x12, 1, 0],
    [4, 0x06, 0x80, 0, 0x30, 0x34, 2, 1],
    [8, 0x0c, 0xa0, 0, 0x40, 0x56, 4, 2],
];

pub fn build() -> Target {
    Target { program: program(), seed: seed(), ground_truth: ground_truth() }
}

fn program() -> crate::ir::MicroProgram {
    let mut a = Asm::new("toy-elf", M);

    // Stage 1: ident block.
    let magic = [0x7fu64, 0x45, 0x4c, 0x46];
    for (i, &mb) in magic.iter().enumerate() {
        let r = a.load(i as u64);
        a.gate(&format!("elf.magic{i}"), Pred::Eq, r, mb);
    }
    let class = a.load(0x04);
    a.check("elf.class", Pred::Eq, class, 2u64);
    let endian = a.load(0x05);
    a.check("elf.endian", Pred::Eq, endian, 1u64);
    let version = a.load(0x06);
    a.check("elf.version", Pred::Eq, version, 1u64);
    let osabi = a.load(0x07);
    a.check("elf.osabi", Pred::Lt, osabi, 0x40u64);
    let etype = a.u16le(0x08);
    a.check("elf.type", Pred::Eq, etype, 0x0002u64);
    let machine = a.u16le(0x0a);
    a.check("elf.machine", Pred::Eq, machine, 0x003eu64);
    a.require(Pred::Eq, class, 2u64);
    a.require(Pred::Eq, endian, 1u64);
    a.require(Pred::Eq, version, 1u64);

    // Stage 2: layout block.
    let phnum = a.load(0x0c);
    a.check("elf.phnum", Pred::Le, phnum, 8u64);
    let shnum = a.load(0x0d);
    a.check("elf.shnum", Pred::Le, shnum, 8u64);
    let shoff = a.u16le(0x0e);
    let shoff_hi = a.load(0x0f);
    a.check("elf.shoff_hi", Pred::Eq, shoff_hi, 0u64);
    let flag_checks: [(u64, Pred, u64); 4] = [
        (0x10, Pred::Lt, 0x80),
        (0x11, Pred::Lt, 0xc0),
        (0x12, Pred::Ge, 0x40),
        (0x13, Pred::Lt, 0x80),
    ];
    for (i, &(off, pred, imm)) in flag_checks.iter().enumerate() {
        let f = a.load(off);
        a.check(&format!("elf.flags{i}"), pred, f, imm);
    }
    let shentsize = a.load(0x14);
    a.check("elf.shentsize", Pred::Eq, shentsize, 8u64);
    let shstrndx = a.load(0x15);
    a.check("elf.shstrndx", Pred::Lt, shstrndx, 4u64);
    let ehsize = a.load(0x16);
    a.check("elf.ehsize", Pred::Eq, ehsize, 0x34u64);
    a.require(Pred::Eq, shoff_hi, 0u64);
    a.require(Pred::Eq, shentsize, 8u64);

    // Stage 3: section table at the parsed offset. The entry base address
    // is data-dependent on shoff, so moving the table moves every read.
    let mut name_off0: Option<RegId> = None;
    for (i, exp) in ENTRIES.iter().enumerate() {
        a.require(Pred::Lt, i as u64, shnum);
        let base = a.b.reg();
        a.b.bin(BinOp::Add, base, shoff, (8 * i) as u64);
        let field = |a: &mut Asm, base: RegId, k: u64| -> RegId {
            let idx = a.b.reg();
            a.b.bin(BinOp::Add, idx, base, k);
            a.load_at(idx)
        };
        let ty = field(&mut a, base, 0);
        a.gate(&format!("elf.sec{i}.type"), Pred::Le, ty, 11u64);
        let name_off = field(&mut a, base, 1);
        a.check(&format!("elf.sec{i}.name_off"), Pred::Lt, name_off, 0x40u64);
        if i == 0 {
            name_off0 = Some(name_off);
        }
        let off_lo = field(&mut a, base, 2);
        a.check(&format!("elf.sec{i}.off_lo"), Pred::Eq, off_lo, u64::from(exp[2]));
        let off_hi = field(&mut a, base, 3);
        a.check(&format!("elf.sec{i}.off_hi"), Pred::Eq, off_hi, 0u64);
        let size = field(&mut a, base, 4);
        a.check(&format!("elf.sec{i}.size"), Pred::Lt, size, 0xc0u64);
        let flags = field(&mut a, base, 5);
        a.check(&format!("elf.sec{i}.flags"), Pred::Lt, flags, 0x80u64);
        let align = field(&mut a, base, 6);
        a.check(&format!("elf.sec{i}.align"), Pred::Le, align, 16u64);
        let link = field(&mut a, base, 7);
        a.check(&format!("elf.sec{i}.link"), Pred::Lt, link, 4u64);
    }

    // Stage 4: deep checks. Entry 0's name must read ".text" out of the
    // string table; the comparison itself is an opaque call.
    let name_off0 = name_off0.expect("entry 0 parsed");
    let straddr = a.b.reg();
    a.b.bin(BinOp::Add, straddr, name_off0, STRTAB as u64);
    let packed = a.pack_bytes_at(straddr, 5);
    a.strcmp_check("elf.nametext", packed, Asm::pack_const(b".text"));
    let dot = a.load_at(straddr);
    a.check("elf.namedot", Pred::Eq, dot, u64::from(b'.'));

    // Rolling checksum: every byte enters the shift register, but each
    // checkpoint looks only at the low 8 bits (the newest byte).
    let hold = a.b.reg();
    a.b.konst(hold, 0);
    let tail = a.b.reg();
    let mut ck = 0;
    for t in 0..CSUM_LEN {
        let byte = a.load((CSUM + t) as u64);
        a.b.bin(BinOp::Shl, hold, hold, 8u64);
        a.b.bin(BinOp::Or, hold, hold, byte);
        if t % 8 == 7 {
            a.b.bin(BinOp::And, tail, hold, 0xffu64);
            a.check(&format!("elf.csum{ck}"), Pred::Lt, tail, 0x80u64);
            ck += 1;
        }
    }

    let tr = a.load(TRAILER as u64);
    a.check("elf.trailer", Pred::Eq, tr, 0x5au64);

    a.finish()
}

fn seed() -> Vec<u8> {
    let mut s = super::patterned(M, 0xa5);
    let header: [u8; 0x17] = [
        0x7f, 0x45, 0x4c, 0x46, // magic
        0x02, 0x01, 0x01, 0x03, // class, endian, version, osabi
        0x02, 0x00, // type
        0x3e, 0x00, // machine
        0x02, 0x04, // phnum, shnum
        0x40, 0x00, // shoff
        0x25, 0x40, 0x80, 0x11, // flags
        0x08, 0x01, 0x34, // shentsize, shstrndx, ehsize
    ];
    s[..header.len()].copy_from_slice(&header);
    for (i, e) in ENTRIES.iter().enumerate() {
        s[SHOFF + 8 * i..SHOFF + 8 * (i + 1)].copy_from_slice(e);
    }
    s[STRTAB..STRTAB + 6].copy_from_slice(b".text\0");
    s[STRTAB + 6..STRTAB + 12].copy_from_slice(b".data\0");
    s[STRTAB + 12..STRTAB + 17].copy_from_slice(b".bss\0");
    // Checkpoint tails must satisfy the < 0x80 checks.
    s[CSUM + 7] = 0x21;
    s[CSUM + 15] = 0x44;
    s[CSUM + 23] = 0x66;
    s[TRAILER] = 0x5a;
    s
}

fn ground_truth() -> Vec<GtRange> {
    vec![
        GtRange { start: 0x00, end: 0x17, label: "header" },
        GtRange { start: SHOFF, end: SHOFF + 24, label: "section_table" },
        GtRange { start: STRTAB, end: STRTAB + 5, label: "section_name" },
        GtRange { start: CSUM + 7, end: CSUM + 8, label: "csum_tail0" },
        GtRange { start: CSUM + 15, end: CSUM + 16, label: "csum_tail1" },
        GtRange { start: CSUM + 23, end: CSUM + 24, label: "csum_tail2" },
        GtRange { start: TRAILER, end: TRAILER + 1, label: "trailer" },
    ]
}
