#!/usr/bin/env python3
"""Regenerates the bundled ISA knowledge bases and per-microarchitecture cost tables.

Throughput numbers are reciprocal throughputs (cycles) of the register forms
as listed in the uops.info instruction tables for Haswell (hsw) and Skylake
(skl), rounded. One number per mnemonic; every form of a mnemonic shares it.

    python3 tools/gen_kb.py data/
"""

import json
import sys
from pathlib import Path

GPR = ["rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp"] + [f"r{i}" for i in range(8, 16)]
LEGACY = {
    "rax": ("eax", "ax", "al"),
    "rbx": ("ebx", "bx", "bl"),
    "rcx": ("ecx", "cx", "cl"),
    "rdx": ("edx", "dx", "dl"),
    "rsi": ("esi", "si", "sil"),
    "rdi": ("edi", "di", "dil"),
    "rbp": ("ebp", "bp", "bpl"),
    "rsp": ("esp", "sp", "spl"),
}

#                  hsw    skl
THROUGHPUT = {
    "mov":         (0.25, 0.25),
    "add":         (0.25, 0.25),
    "sub":         (0.25, 0.25),
    "and":         (0.25, 0.25),
    "or":          (0.25, 0.25),
    "xor":         (0.25, 0.25),
    "cmp":         (0.25, 0.25),
    "test":        (0.25, 0.25),
    "shl":         (0.5, 0.5),
    "shr":         (0.5, 0.5),
    "sar":         (0.5, 0.5),
    "imul":        (1.0, 1.0),
    "mul":         (1.0, 1.0),
    "div":         (24.0, 21.0),
    "idiv":        (24.0, 21.0),
    "lea":         (0.5, 0.5),
    "inc":         (0.25, 0.25),
    "dec":         (0.25, 0.25),
    "neg":         (0.25, 0.25),
    "not":         (0.25, 0.25),
    "push":        (1.0, 1.0),
    "pop":         (0.5, 0.5),
    "movzx":       (0.25, 0.25),
    "movsx":       (0.25, 0.25),
    "movsxd":      (0.25, 0.25),
    "nop":         (0.25, 0.25),
    "jmp":         (2.0, 2.0),
    "call":        (2.0, 3.0),
    "ret":         (1.0, 1.0),
    "addss":       (1.0, 0.5),
    "subss":       (1.0, 0.5),
    "mulss":       (0.5, 0.5),
    "divss":       (5.0, 3.0),
    "addsd":       (1.0, 0.5),
    "subsd":       (1.0, 0.5),
    "mulsd":       (0.5, 0.5),
    "divsd":       (8.0, 4.0),
    "movss":       (0.5, 0.5),
    "movsd":       (0.5, 0.5),
    "movaps":      (0.25, 0.25),
    "xorps":       (0.33, 0.33),
    "andps":       (0.33, 0.33),
    "orps":        (0.33, 0.33),
    "addps":       (1.0, 0.5),
    "mulps":       (0.5, 0.5),
    "sqrtss":      (7.0, 3.0),
    "vaddss":      (1.0, 0.5),
    "vsubss":      (1.0, 0.5),
    "vmulss":      (0.5, 0.5),
    "vdivss":      (5.0, 3.0),
    "vxorps":      (0.33, 0.33),
    "vandps":      (0.33, 0.33),
    "vorps":       (0.33, 0.33),
    "vaddps":      (1.0, 0.5),
    "vsubps":      (1.0, 0.5),
    "vmulps":      (0.5, 0.5),
    "vdivps":      (5.0, 3.0),
    "vmovaps":     (0.25, 0.25),
    "vmovss":      (0.5, 0.5),
    "vsqrtss":     (7.0, 3.0),
    "vfmadd231ss": (0.5, 0.5),
    "adc":         (1.0, 0.5),
    "sbb":         (1.0, 0.5),
    "rol":         (0.5, 0.5),
    "ror":         (0.5, 0.5),
    "bt":          (0.5, 0.5),
    "bswap":       (0.5, 0.5),
    "bsf":         (1.0, 1.0),
    "bsr":         (1.0, 1.0),
    "popcnt":      (1.0, 1.0),
    "lzcnt":       (1.0, 1.0),
    "tzcnt":       (1.0, 1.0),
    "andn":        (0.5, 0.5),
    "shlx":        (0.5, 0.5),
    "shrx":        (0.5, 0.5),
    "sarx":        (0.5, 0.5),
}

CMOV = ["cmove", "cmovne", "cmovl", "cmovle", "cmovg", "cmovge", "cmovb", "cmova"]
SETCC = ["sete", "setne", "setl", "setle", "setg", "setge", "setb", "seta"]
for _m in CMOV + SETCC:
    THROUGHPUT[_m] = (0.5, 0.5)

# SIMD families: (suffix-free stem, hsw, skl). Each stem yields a legacy SSE
# two-operand form and a VEX three-operand form (xmm and, for packed ops, ymm).
FP_ARITH = {
    "add": (1.0, 0.5), "sub": (1.0, 0.5), "mul": (0.5, 0.5), "min": (1.0, 0.5), "max": (1.0, 0.5),
}
FP_DIV = {"ss": (5.0, 3.0), "sd": (8.0, 4.0), "ps": (5.0, 3.0), "pd": (8.0, 4.0)}
FP_SQRT = {"ss": (7.0, 3.0), "sd": (8.0, 4.5), "ps": (7.0, 3.0), "pd": (8.0, 4.5)}
FP_LOGIC = ("and", "andn", "or", "xor")
FP_SHUFFLE = ("unpckl", "unpckh")
FP_HORIZONTAL = {"hadd": (2.0, 2.0), "hsub": (2.0, 2.0), "addsub": (1.0, 0.5)}
INT_SIMD = {}
for _op in ("add", "sub"):
    for _t in "bwdq":
        INT_SIMD[f"p{_op}{_t}"] = (0.5, 0.33)
for _op in ("adds", "addus", "subs", "subus"):
    for _t in "bw":
        INT_SIMD[f"p{_op}{_t}"] = (0.5, 0.5)
for _op in ("maxs", "maxu", "mins", "minu"):
    for _t in "bwd":
        INT_SIMD[f"p{_op}{_t}"] = (0.5, 0.5)
for _op in ("cmpeq", "cmpgt"):
    for _t in "bwd":
        INT_SIMD[f"p{_op}{_t}"] = (0.5, 0.5)
for _m in ("pand", "pandn", "por", "pxor", "pavgb", "pavgw", "psignb", "psignw", "psignd"):
    INT_SIMD[_m] = (0.5, 0.33)
for _m in ("pmullw", "pmulhw", "pmulhuw", "pmuludq", "pmuldq", "pmaddwd", "pmaddubsw", "psadbw"):
    INT_SIMD[_m] = (1.0, 0.5)
INT_SIMD["pmulld"] = (2.0, 1.0)
for _m in ("punpcklbw", "punpckhbw", "punpcklwd", "punpckhwd", "punpckldq", "punpckhdq",
           "punpcklqdq", "punpckhqdq", "packsswb", "packssdw", "packuswb", "packusdw", "pshufb"):
    INT_SIMD[_m] = (1.0, 1.0)
for _m in ("phaddw", "phaddd", "phsubw", "phsubd"):
    INT_SIMD[_m] = (2.0, 2.0)
FMA = ("vfmadd132", "vfmadd213", "vfmadd231", "vfmsub231", "vfnmadd231")


def _simd_throughput():
    for stem, tp in FP_ARITH.items():
        for sfx in ("ss", "sd", "ps", "pd"):
            THROUGHPUT.setdefault(stem + sfx, tp)
            THROUGHPUT.setdefault("v" + stem + sfx, tp)
    for sfx in ("ss", "sd", "ps", "pd"):
        THROUGHPUT.setdefault("div" + sfx, FP_DIV[sfx])
        THROUGHPUT.setdefault("vdiv" + sfx, FP_DIV[sfx])
        THROUGHPUT.setdefault("sqrt" + sfx, FP_SQRT[sfx])
        THROUGHPUT.setdefault("vsqrt" + sfx, FP_SQRT[sfx])
    for sfx in ("ps", "pd"):
        for stem in FP_LOGIC:
            THROUGHPUT.setdefault(stem + sfx, (0.33, 0.33))
            THROUGHPUT.setdefault("v" + stem + sfx, (0.33, 0.33))
        for stem in FP_SHUFFLE:
            THROUGHPUT.setdefault(stem + sfx, (1.0, 1.0))
            THROUGHPUT.setdefault("v" + stem + sfx, (1.0, 1.0))
        for stem, tp in FP_HORIZONTAL.items():
            THROUGHPUT.setdefault(stem + sfx, tp)
            THROUGHPUT.setdefault("v" + stem + sfx, tp)
    for m in ("rcpss", "rsqrtss", "rcpps", "rsqrtps"):
        THROUGHPUT.setdefault(m, (1.0, 1.0))
        THROUGHPUT.setdefault("v" + m, (1.0, 1.0))
    for m, tp in INT_SIMD.items():
        THROUGHPUT.setdefault(m, tp)
        THROUGHPUT.setdefault("v" + m, tp)
    for stem in FMA:
        for sfx in ("ss", "sd", "ps", "pd"):
            THROUGHPUT.setdefault(stem + sfx, (0.5, 0.5))
    for m in ("movups", "movapd", "movupd", "movdqa", "movdqu"):
        THROUGHPUT.setdefault(m, (0.25, 0.25))
        THROUGHPUT.setdefault("v" + m, (0.25, 0.25))
    THROUGHPUT.setdefault("vmovsd", (0.5, 0.5))
    THROUGHPUT.setdefault("vbroadcastss", (0.5, 0.5))


_simd_throughput()

CONTROL = {"jmp", "call", "ret"}
FLAG_WRITERS = {"add", "sub", "and", "or", "xor", "cmp", "test", "shl", "shr", "sar",
                "imul", "mul", "div", "idiv", "inc", "dec", "neg", "adc", "sbb", "rol", "ror",
                "bt", "bsf", "bsr", "popcnt", "lzcnt", "tzcnt", "andn"}
FLAG_READERS = {"adc", "sbb"} | set(CMOV) | set(SETCC)
IMM_FOR = {8: 8, 16: 16, 32: 32, 64: 32}


def reg(w, a):
    return {"kind": "register", "width_bits": w, "access": a}


def mem(w, a):
    return {"kind": "memory", "width_bits": w, "access": a}


def imm(w):
    return {"kind": "immediate", "width_bits": w, "access": "read"}


def addr(w):
    return {"kind": "address", "width_bits": w, "access": "read"}


def core_registers():
    regs = []
    for r in GPR:
        subst = r != "rsp"
        names = (r,) + (LEGACY[r] if r in LEGACY else (r + "d", r + "w", r + "b"))
        for name, width in zip(names, (64, 32, 16, 8)):
            regs.append({"name": name, "width_bits": width, "family": r, "substitutable": subst})
    for i in range(16):
        regs.append({"name": f"xmm{i}", "width_bits": 128, "family": f"ymm{i}", "substitutable": True})
        regs.append({"name": f"ymm{i}", "width_bits": 256, "family": f"ymm{i}", "substitutable": True})
    regs.append({"name": "rflags", "width_bits": 64, "family": "rflags", "substitutable": False})
    return regs


def core_forms():
    forms = []

    def add(m, slots, reads=(), writes=()):
        reads, writes = list(reads), list(writes)
        if m in FLAG_WRITERS:
            writes.append("rflags")
        if m in FLAG_READERS:
            reads.append("rflags")
        forms.append((m, slots, reads, writes))

    widths = (8, 16, 32, 64)
    for m in ("add", "sub", "and", "or", "xor"):
        for w in widths:
            add(m, [reg(w, "readwrite"), reg(w, "read")])
            add(m, [reg(w, "readwrite"), mem(w, "read")])
            add(m, [mem(w, "readwrite"), reg(w, "read")])
            add(m, [reg(w, "readwrite"), imm(IMM_FOR[w])])
            add(m, [mem(w, "readwrite"), imm(IMM_FOR[w])])
    for m in ("cmp", "test"):
        for w in widths:
            add(m, [reg(w, "read"), reg(w, "read")])
            add(m, [mem(w, "read"), reg(w, "read")])
            add(m, [reg(w, "read"), imm(IMM_FOR[w])])
            add(m, [mem(w, "read"), imm(IMM_FOR[w])])
    for w in widths:
        add("mov", [reg(w, "write"), reg(w, "read")])
        add("mov", [reg(w, "write"), mem(w, "read")])
        add("mov", [mem(w, "write"), reg(w, "read")])
        add("mov", [reg(w, "write"), imm(64 if w == 64 else w)])
        add("mov", [mem(w, "write"), imm(IMM_FOR[w])])
    for m in ("shl", "shr", "sar"):
        for w in widths:
            add(m, [reg(w, "readwrite"), imm(8)])
            add(m, [mem(w, "readwrite"), imm(8)])
    for w in (16, 32, 64):
        add("imul", [reg(w, "readwrite"), reg(w, "read")])
        add("imul", [reg(w, "readwrite"), mem(w, "read")])
        add("imul", [reg(w, "write"), reg(w, "read"), imm(IMM_FOR[w])])
    for w, (a, d) in ((64, ("rax", "rdx")), (32, ("eax", "edx"))):
        for m in ("imul", "mul"):
            add(m, [reg(w, "read")], reads=[a], writes=[a, d])
            add(m, [mem(w, "read")], reads=[a], writes=[a, d])
        for m in ("div", "idiv"):
            add(m, [reg(w, "read")], reads=[a, d], writes=[a, d])
            add(m, [mem(w, "read")], reads=[a, d], writes=[a, d])
    for w in (32, 64):
        add("lea", [reg(w, "write"), addr(w)])
    for m in ("inc", "dec", "neg", "not"):
        for w in widths:
            add(m, [reg(w, "readwrite")])
            add(m, [mem(w, "readwrite")])
    add("push", [reg(64, "read")], reads=["rsp"], writes=["rsp"])
    add("push", [mem(64, "read")], reads=["rsp"], writes=["rsp"])
    add("pop", [reg(64, "write")], reads=["rsp"], writes=["rsp"])
    add("pop", [mem(64, "write")], reads=["rsp"], writes=["rsp"])
    for m in ("movzx", "movsx"):
        for dst in (32, 64):
            for src in (8, 16):
                add(m, [reg(dst, "write"), reg(src, "read")])
                add(m, [reg(dst, "write"), mem(src, "read")])
    add("movsxd", [reg(64, "write"), reg(32, "read")])
    add("movsxd", [reg(64, "write"), mem(32, "read")])
    add("nop", [])
    add("jmp", [reg(64, "read")])
    add("call", [reg(64, "read")], reads=["rsp"], writes=["rsp"])
    add("ret", [], reads=["rsp"], writes=["rsp"])

    for m in ("adc", "sbb"):
        for w in widths:
            add(m, [reg(w, "readwrite"), reg(w, "read")])
            add(m, [reg(w, "readwrite"), mem(w, "read")])
            add(m, [mem(w, "readwrite"), reg(w, "read")])
            add(m, [reg(w, "readwrite"), imm(IMM_FOR[w])])
    for m in ("rol", "ror"):
        for w in widths:
            add(m, [reg(w, "readwrite"), imm(8)])
            add(m, [mem(w, "readwrite"), imm(8)])
    for w in (16, 32, 64):
        add("bt", [reg(w, "read"), reg(w, "read")])
        add("bt", [reg(w, "read"), imm(8)])
        for m in CMOV:
            add(m, [reg(w, "readwrite"), reg(w, "read")])
            add(m, [reg(w, "readwrite"), mem(w, "read")])
        for m in ("bsf", "bsr", "popcnt", "lzcnt", "tzcnt"):
            add(m, [reg(w, "write"), reg(w, "read")])
            add(m, [reg(w, "write"), mem(w, "read")])
    for w in (32, 64):
        add("bswap", [reg(w, "readwrite")])
        for m in ("andn", "shlx", "shrx", "sarx"):
            add(m, [reg(w, "write"), reg(w, "read"), reg(w, "read")])
        add("andn", [reg(w, "write"), reg(w, "read"), mem(w, "read")])
        for m in ("shlx", "shrx", "sarx"):
            add(m, [reg(w, "write"), mem(w, "read"), reg(w, "read")])
    for m in SETCC:
        add(m, [reg(8, "write")])
        add(m, [mem(8, "write")])

    # legacy SSE, two-operand destructive; `ew` is the memory width
    sse = []
    for stem in FP_ARITH:
        sse += [(stem + "ss", 32), (stem + "sd", 64), (stem + "ps", 128), (stem + "pd", 128)]
    sse += [("divss", 32), ("divsd", 64), ("divps", 128), ("divpd", 128)]
    for sfx in ("ps", "pd"):
        sse += [(stem + sfx, 128) for stem in FP_LOGIC + FP_SHUFFLE + tuple(FP_HORIZONTAL)]
    sse += [(m, 128) for m in INT_SIMD]
    for m, ew in sse:
        add(m, [reg(128, "readwrite"), reg(128, "read")])
        add(m, [reg(128, "readwrite"), mem(ew, "read")])
    for m, ew in (("sqrtss", 32), ("sqrtsd", 64), ("sqrtps", 128), ("sqrtpd", 128),
                  ("rcpss", 32), ("rsqrtss", 32), ("rcpps", 128), ("rsqrtps", 128)):
        add(m, [reg(128, "write"), reg(128, "read")])
        add(m, [reg(128, "write"), mem(ew, "read")])
    for m in ("movups", "movapd", "movupd", "movdqa", "movdqu"):
        add(m, [reg(128, "write"), reg(128, "read")])
        add(m, [reg(128, "write"), mem(128, "read")])
        add(m, [mem(128, "write"), reg(128, "read")])
    for m, ew in (("movss", 32), ("movsd", 64), ("movaps", 128)):
        add(m, [reg(128, "write"), mem(ew, "read")])
        add(m, [mem(ew, "write"), reg(128, "read")])
    add("movss", [reg(128, "readwrite"), reg(128, "read")])
    add("movsd", [reg(128, "readwrite"), reg(128, "read")])
    add("movaps", [reg(128, "write"), reg(128, "read")])

    # AVX, three-operand non-destructive
    scalar = []
    for stem in tuple(FP_ARITH) + ("div", "sqrt"):
        scalar += [("v" + stem + "ss", 32), ("v" + stem + "sd", 64)]
    scalar += [("vrcpss", 32), ("vrsqrtss", 32)]
    for m, ew in scalar:
        add(m, [reg(128, "write"), reg(128, "read"), reg(128, "read")])
        add(m, [reg(128, "write"), reg(128, "read"), mem(ew, "read")])
    for stem in FMA:
        for sfx, ew in (("ss", 32), ("sd", 64)):
            add(stem + sfx, [reg(128, "readwrite"), reg(128, "read"), reg(128, "read")])
            add(stem + sfx, [reg(128, "readwrite"), reg(128, "read"), mem(ew, "read")])
        for sfx in ("ps", "pd"):
            for w in (128, 256):
                add(stem + sfx, [reg(w, "readwrite"), reg(w, "read"), reg(w, "read")])
                add(stem + sfx, [reg(w, "readwrite"), reg(w, "read"), mem(w, "read")])
    packed = []
    for sfx in ("ps", "pd"):
        packed += ["v" + stem + sfx for stem in tuple(FP_ARITH) + ("div",) + FP_LOGIC + FP_SHUFFLE
                   + tuple(FP_HORIZONTAL)]
    packed += ["v" + m for m in INT_SIMD]
    for m in packed:
        for w in (128, 256):
            add(m, [reg(w, "write"), reg(w, "read"), reg(w, "read")])
            add(m, [reg(w, "write"), reg(w, "read"), mem(w, "read")])
    for m in ("vsqrtps", "vsqrtpd", "vrcpps", "vrsqrtps"):
        for w in (128, 256):
            add(m, [reg(w, "write"), reg(w, "read")])
            add(m, [reg(w, "write"), mem(w, "read")])
    for m in ("vmovups", "vmovapd", "vmovupd", "vmovdqa", "vmovdqu"):
        for w in (128, 256):
            add(m, [reg(w, "write"), reg(w, "read")])
            add(m, [reg(w, "write"), mem(w, "read")])
            add(m, [mem(w, "write"), reg(w, "read")])
    add("vmovsd", [reg(128, "write"), mem(64, "read")])
    add("vmovsd", [mem(64, "write"), reg(128, "read")])
    add("vmovsd", [reg(128, "write"), reg(128, "read"), reg(128, "read")])
    for w in (128, 256):
        add("vbroadcastss", [reg(w, "write"), mem(32, "read")])
    for w in (128, 256):
        add("vmovaps", [reg(w, "write"), reg(w, "read")])
        add("vmovaps", [reg(w, "write"), mem(w, "read")])
        add("vmovaps", [mem(w, "write"), reg(w, "read")])
    add("vmovss", [reg(128, "write"), mem(32, "read")])
    add("vmovss", [mem(32, "write"), reg(128, "read")])
    add("vmovss", [reg(128, "write"), reg(128, "read"), reg(128, "read")])
    return forms


def tiny_registers():
    return [{"name": r, "width_bits": 64, "family": r, "substitutable": r != "rsp"}
            for r in ("rax", "rbx", "rcx", "rdx", "rsp")]


def tiny_forms():
    return [
        ("mov", [reg(64, "write"), reg(64, "read")], [], []),
        ("mov", [reg(64, "write"), imm(32)], [], []),
        ("add", [reg(64, "readwrite"), reg(64, "read")], [], []),
        ("add", [reg(64, "readwrite"), imm(32)], [], []),
        ("sub", [reg(64, "readwrite"), reg(64, "read")], [], []),
        ("sub", [reg(64, "readwrite"), imm(32)], [], []),
        ("lea", [reg(64, "write"), addr(64)], [], []),
        ("push", [reg(64, "read")], ["rsp"], ["rsp"]),
        ("pop", [reg(64, "write")], ["rsp"], ["rsp"]),
    ]


def emit_kb(version, registers, forms):
    opcodes = []
    for m, slots, reads, writes in forms:
        hsw, skl = THROUGHPUT[m]
        opcodes.append({
            "mnemonic": m,
            "bb_valid": m not in CONTROL,
            "slots": slots,
            "implicit_reads": reads,
            "implicit_writes": writes,
            "throughput": {"hsw": hsw, "skl": skl},
        })
    return {"version": version, "track_flags": False, "registers": registers, "opcodes": opcodes}


def emit_table(march_idx, mnemonics):
    lines = ["mnemonic,cycles"]
    for m in sorted(mnemonics):
        lines.append(f"{m},{THROUGHPUT[m][march_idx]}")
    return "\n".join(lines) + "\n"


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    core = emit_kb("core-1", core_registers(), core_forms())
    tiny = emit_kb("tiny-1", tiny_registers(), tiny_forms())
    (out / "isa_core.json").write_text(json.dumps(core, indent=1) + "\n")
    (out / "isa_tiny.json").write_text(json.dumps(tiny, indent=1) + "\n")
    mnemonics = {o["mnemonic"] for o in core["opcodes"]}
    for idx, march in enumerate(("hsw", "skl")):
        (out / f"costs_{march}.csv").write_text(emit_table(idx, mnemonics))
    print(f"{len(mnemonics)} mnemonics, {len(core['opcodes'])} forms")


if __name__ == "__main__":
    main()
