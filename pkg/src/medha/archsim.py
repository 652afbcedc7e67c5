"""Deterministic instruction-level latency model of the accelerator.

The machine is a row of residue-polynomial arithmetic units (RPAUs), one
per RNS limb plus one for the special prime, joined by a broadcast ring.
Each RPAU owns a bank of residue-polynomial memory (RPM) slots and two
execution pipes: a main pipe (transforms, coefficient-wise ops, scaling)
and a dyadic pipe (evaluation-domain elementwise ops). Two in-order
program controllers drive the row; most instructions are SIMD across a
mask of RPAUs and retire simultaneously on all of them.

Scheduling semantics (all deterministic, integer cycle counts):
  - a controller dispatches instructions in program order: an instruction
    never starts before its predecessor's start, and never before the
    retire time of the latest fence (sync) instruction;
  - an instruction starts when every masked RPAU's target pipe is free,
    every producer of its sources has retired (read-after-write), and
    every earlier reader of its destinations has retired
    (write-after-read);
  - the broadcast ring is a single global resource: one broadcast at a
    time, regardless of source;
  - SIMD instructions occupy every masked RPAU's pipe for the full cost
    and retire together;
  - SYNC_PIPES waits for all instructions its own controller has issued
    to retire; SYNC_CTRL is a rendezvous between the two controllers;
    both cost zero cycles, but a rendezvous that opens a high-level
    operation charges the fixed per-operation dispatch overhead.

Costs are word counts through fully pipelined units, so one elementwise
pass over an N-coefficient residue polynomial costs N/16 cycles with 16
lanes, and an N-point transform costs (N/16)·log2(N)/2 rounded to the
measured 7,168. Split mode stores each limb as two half-degree
polynomials; instructions that land in a minus-half slot carry a single
calibratable data-movement surcharge (`split_move_cycles`), the one
quantity the hardware measurements leave unspecified.

The same instruction streams can be executed functionally: every opcode
maps onto a polynomial-ring operation, and the executed stream must
reproduce the evaluation engine's ciphertexts bit for bit. That keeps
the latency model honest: a schedule that reorders real dependencies
would compute the wrong ciphertext.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .heaan import Ciphertext, Plaintext, _centered_int64
from .keys import signed_to_residues
from .modarith import PrimeModulus
from .params import ParamSet
from .polyring import (
    STANDARD,
    ResiduePoly,
    automorphism,
    automorphism_coeff,
    dyadic,
    ntt_forward,
    ntt_inverse,
    scalar_mul,
)
from .ringsplit import SplitPair, join, split

# ---------------------------------------------------------------------------
# instruction set

NTT = "NTT"
INTT = "INTT"
CWISE = "CWISE"          # main-pipe elementwise add/sub/mul
SCALE_QINV = "SCALE_QINV"  # main-pipe scaling by an inverse-modulus constant
DYADIC = "DYADIC"        # dyadic-pipe elementwise add/sub/mul/mac
BCAST = "BCAST"          # ring broadcast with centered re-reduction on receive
SPLIT = "SPLIT"          # butterfly: full-ring coefficients -> two half rings
JOIN = "JOIN"            # butterfly: two half rings -> full-ring coefficients
AUTO = "AUTO"            # Galois automorphism
SYNC_PIPES = "SYNC_PIPES"
SYNC_CTRL = "SYNC_CTRL"
END = "END"

PIPE_MAIN = "main"
PIPE_DYADIC = "dyadic"
PIPE_RING = "ring"
PIPE_NONE = "none"

_SYNC_OPS = (SYNC_PIPES, SYNC_CTRL, END)


class ArchSimError(Exception):
    """Base class for compilation and simulation failures."""


class MemoryBudgetError(ArchSimError):
    """A compiled schedule needs more RPM slots than the machine has."""


class DependencyCycleError(ArchSimError):
    """No controller can make progress; the streams deadlock."""


class UnsupportedOpError(ArchSimError):
    """The requested operation or workload is not in the instruction set."""


@dataclass(frozen=True)
class Instruction:
    op: str
    pipe: str
    ctrl: int
    rpaus: tuple[int, ...]
    dst: tuple[int, ...] = ()
    src: tuple = ()              # ("slot", s) | ("remote", rpau, s) | ("ksk", id, comp, i)
    kind: str = ""
    words: int = 1
    half: str = ""               # "m" marks a minus-half destination
    meta: dict = field(default_factory=dict, hash=False, compare=False)
    uid: int = -1
    deps: tuple[int, ...] = ()
    op_seq: int = -1

    def label(self) -> str:
        tag = self.op if not self.kind else f"{self.op}.{self.kind}"
        r = self.rpaus
        if not r:
            return f"{tag}@ctrl{self.ctrl}"
        where = f"rpau{r[0]}" if len(r) == 1 else f"rpaus{r[0]}-{r[-1]}"
        return f"{tag}@{where}"


@dataclass
class CostModel:
    """Per-instruction cycle costs of the pipelined units."""

    ntt: int = 7168
    intt: int = 7168
    cwise: int = 512
    scale_qinv: int = 512
    dyadic: int = 4096
    bcast: int = 512             # per residue polynomial carried
    split: int = 1024
    join: int = 1024
    auto: int = 512
    op_overhead: int = 128       # controller dispatch cost per high-level op
    split_move_cycles: int = 345  # movement surcharge per minus-half destination

    def cost(self, ins: Instruction) -> int:
        base = {
            NTT: self.ntt,
            INTT: self.intt,
            CWISE: self.cwise,
            SCALE_QINV: self.scale_qinv,
            DYADIC: self.dyadic,
            BCAST: self.bcast * ins.words,
            SPLIT: self.split,
            JOIN: self.join,
            AUTO: self.auto * ins.words,
            SYNC_PIPES: 0,
            SYNC_CTRL: 0,
            END: 0,
        }[ins.op]
        if ins.half == "m":
            base += self.split_move_cycles
        return base


def calibrate_split_move(cost: CostModel, target_add_cycles: int) -> int:
    """Fit the movement surcharge to a measured split-mode addition total.

    Split addition is four elementwise instructions, two of which land in
    minus halves, plus the dispatch overhead. That closed form pins the
    surcharge; the value is rounded up so totals never undershoot.
    """
    spread = target_add_cycles - 4 * cost.cwise - cost.op_overhead
    if spread < 0:
        raise ArchSimError("addition target smaller than the surcharge-free cost")
    return -((-spread) // 2)  # ceil(spread / 2)


@dataclass(frozen=True)
class MachineConfig:
    n_rpaus: int = 10
    rpm_slots: int = 13          # ciphertext-dependent residue-poly slots per RPAU
    clock_mhz: float = 200.0

    @property
    def special_rpau(self) -> int:
        return self.n_rpaus - 1


# ---------------------------------------------------------------------------
# compiled programs

@dataclass
class OpProgram:
    kind: str
    name: str
    streams: tuple[list[Instruction], list[Instruction]]
    inputs: dict          # var -> binding
    outputs: dict         # var -> binding
    meta: dict = field(default_factory=dict)
    high_water: dict = field(default_factory=dict)   # rpau -> peak slots
    functional: bool = True


@dataclass
class Program:
    pset: ParamSet
    machine: MachineConfig
    ops: list[OpProgram]

    @property
    def instruction_count(self) -> int:
        return sum(len(s) for op in self.ops for s in op.streams)

    def high_water(self) -> dict[int, int]:
        peak: dict[int, int] = {}
        for op in self.ops:
            for r, v in op.high_water.items():
                peak[r] = max(peak.get(r, 0), v)
        return peak


@dataclass
class CycleReport:
    total_cycles: int
    per_pipe_busy: dict[str, int]
    op_histogram: dict[str, dict]
    per_op: list[dict]
    critical_path: list[str]
    memory_high_water: dict
    instruction_count: int
    clock_mhz: float
    serial: bool

    @property
    def latency_us(self) -> float:
        return self.total_cycles / self.clock_mhz

    @property
    def throughput_per_s(self) -> float:
        return 1e6 / self.latency_us if self.total_cycles else 0.0


# ---------------------------------------------------------------------------
# stream builder

class _Builder:
    """Emits the two controller streams and tracks slot dataflow.

    Dependencies are resolved at compile time into explicit retire-before-
    start edges, so the simulator never has to guess: read-after-write
    edges point at the last writer of each source slot, write-after-read
    edges at every reader since that write, write-after-write at the
    previous writer.
    """

    def __init__(self, machine: MachineConfig, op_seq: int, op_kind: str):
        self.machine = machine
        self.op_seq = op_seq
        self.op_kind = op_kind
        self.streams: tuple[list[Instruction], list[Instruction]] = ([], [])
        self.uid = 0
        self.last_write: dict[tuple[int, int], int] = {}
        self.readers: dict[tuple[int, int], list[int]] = {}
        self.live: dict[int, set[int]] = {}
        self.peak: dict[int, int] = {}
        self.sync_seq = 0

    # -- slot lifecycle -----------------------------------------------------

    def _touch(self, rpau: int, slot: int):
        if slot >= self.machine.rpm_slots:
            raise MemoryBudgetError(
                f"slot {slot} exceeds the {self.machine.rpm_slots}-slot RPM bank"
            )
        s = self.live.setdefault(rpau, set())
        if slot not in s:
            s.add(slot)
            self.peak[rpau] = max(self.peak.get(rpau, 0), len(s))
            if len(s) > self.machine.rpm_slots:
                raise MemoryBudgetError(
                    f"rpau {rpau} needs {len(s)} live slots; "
                    f"budget is {self.machine.rpm_slots}"
                )

    def preload(self, rpaus: Sequence[int], slots: Sequence[int]):
        for r in rpaus:
            for s in slots:
                self._touch(r, s)

    def free(self, rpaus: Sequence[int], slots: Sequence[int]):
        for r in rpaus:
            for s in slots:
                self.live.get(r, set()).discard(s)

    # -- emission -----------------------------------------------------------

    def emit(
        self,
        op: str,
        pipe: str,
        ctrl: int,
        rpaus: Sequence[int],
        dst: Sequence[int] = (),
        src: Sequence = (),
        kind: str = "",
        words: int = 1,
        half: str = "",
        **meta,
    ) -> Instruction:
        rpaus = tuple(rpaus)
        deps: set[int] = set()
        reads: list[tuple[int, int]] = []
        for term in src:
            if term[0] == "slot":
                reads.extend((r, term[1]) for r in rpaus)
            elif term[0] == "remote":
                reads.append((term[1], term[2]))
            elif term[0] == "ksk":
                pass  # key material lives outside the RPM dataflow
            else:
                raise ArchSimError(f"unknown source kind {term[0]!r}")
        writes = [(r, s) for r in rpaus for s in dst]
        for ref in reads:
            w = self.last_write.get(ref)
            if w is not None:
                deps.add(w)
        for ref in writes:
            w = self.last_write.get(ref)
            if w is not None:
                deps.add(w)
            deps.update(self.readers.get(ref, ()))
        ins = Instruction(
            op=op, pipe=pipe, ctrl=ctrl, rpaus=rpaus, dst=tuple(dst),
            src=tuple(src), kind=kind, words=words, half=half, meta=meta,
            uid=self.uid, deps=tuple(sorted(deps)), op_seq=self.op_seq,
        )
        self.uid += 1
        for ref in reads:
            self.readers.setdefault(ref, []).append(ins.uid)
        for ref in writes:
            self._touch(*ref)
            self.last_write[ref] = ins.uid
            self.readers[ref] = []
        self.streams[ctrl].append(ins)
        return ins

    def sync_ctrl(self, op_start: bool = False):
        sid = self.sync_seq
        self.sync_seq += 1
        for c in (0, 1):
            self.streams[c].append(
                Instruction(
                    op=SYNC_CTRL, pipe=PIPE_NONE, ctrl=c, rpaus=(),
                    meta={"sync_id": sid, "op_start": op_start},
                    uid=self.uid, op_seq=self.op_seq,
                )
            )
            self.uid += 1

    def sync_pipes(self):
        for c in (0, 1):
            self.streams[c].append(
                Instruction(
                    op=SYNC_PIPES, pipe=PIPE_NONE, ctrl=c, rpaus=(),
                    uid=self.uid, op_seq=self.op_seq,
                )
            )
            self.uid += 1

    def finish(self, kind, name, inputs, outputs, functional=True, **meta) -> OpProgram:
        return OpProgram(
            kind=kind, name=name, streams=self.streams, inputs=inputs,
            outputs=outputs, meta=meta, high_water=dict(self.peak),
            functional=functional,
        )


# ---------------------------------------------------------------------------
# compilation

def _limb_rpaus(level: int) -> tuple[int, ...]:
    return tuple(range(level))


def _ct_binding(rpaus, slots_c0, slots_c1):
    return {
        "kind": "ct",
        "components": [
            [(r, tuple(slots_c0)) for r in rpaus],
            [(r, tuple(slots_c1)) for r in rpaus],
        ],
    }


def _pt_binding(rpaus, slots):
    return {"kind": "pt", "components": [[(r, tuple(slots)) for r in rpaus]]}


def _halves(pset: ParamSet, base_slot: int) -> tuple[int, ...]:
    """Slot tuple for one logical limb: one slot native, a pair in split mode."""
    if pset.mode == "split":
        return (2 * base_slot, 2 * base_slot + 1)
    return (base_slot,)


class _OpCompiler:
    """Shared context for compiling one high-level operation."""

    def __init__(self, pset: ParamSet, machine: MachineConfig, level: int,
                 op_seq: int, kind: str):
        if level < 1 or level > pset.levels:
            raise UnsupportedOpError(f"level {level} outside 1..{pset.levels}")
        if pset.levels + 1 > machine.n_rpaus:
            raise UnsupportedOpError("parameter set needs more RPAUs than built")
        self.pset = pset
        self.machine = machine
        self.level = level
        self.split = pset.mode == "split"
        self.b = _Builder(machine, op_seq, kind)
        self.limbs = _limb_rpaus(level)
        self.sp = machine.special_rpau
        self.all_r = self.limbs + (self.sp,)
        # rotating receive buffers; in split mode three physical slots carry
        # a two-slot payload so the next broadcast can land while the
        # previous one is still being consumed
        self._recv_seq = 0

    # receive-buffer rotation ------------------------------------------------

    def recv_slots(self, ring: Sequence[int]) -> tuple[int, ...]:
        if not self.split:
            s = ring[self._recv_seq % len(ring)]
            self._recv_seq += 1
            return (s,)
        k = (2 * self._recv_seq) % len(ring)
        self._recv_seq += 1
        return (ring[k], ring[(k + 1) % len(ring)])

    # instruction helpers ----------------------------------------------------

    def cwise(self, ctrl, rpaus, kind, dst, srcs):
        for h, d in enumerate(dst):
            self.b.emit(
                CWISE, PIPE_MAIN, ctrl, rpaus, dst=(d,),
                src=tuple(("slot", s[h]) for s in srcs), kind=kind,
                half="m" if (self.split and h == 1) else "",
            )

    def dyadic_op(self, ctrl, rpaus, kind, dst, srcs, ksk=None):
        # ksk = (ksk_id, comp, i); the executing rpau picks its own column
        for h, d in enumerate(dst):
            half = "m" if (self.split and h == 1) else ""
            terms = [("slot", s[h]) for s in srcs]
            if ksk is not None:
                terms.append(("ksk", *ksk))
            if kind == "mac":
                terms.append(("slot", d))
            self.b.emit(
                DYADIC, PIPE_DYADIC, ctrl, rpaus, dst=(d,), src=tuple(terms),
                kind=kind, half=half,
            )

    def transform(self, op, ctrl, rpaus, slots):
        for h, s in enumerate(slots):
            self.b.emit(
                op, PIPE_MAIN, ctrl, rpaus, dst=(s,), src=(("slot", s),),
                half="m" if (self.split and h == 1) else "",
            )

    def scale_qinv(self, ctrl, rpaus, slots, drop_idx):
        for h, s in enumerate(slots):
            self.b.emit(
                SCALE_QINV, PIPE_MAIN, ctrl, rpaus, dst=(s,), src=(("slot", s),),
                half="m" if (self.split and h == 1) else "", drop_idx=drop_idx,
            )

    def join_split_bcast(self, ctrl, src_rpau, src_slots, receivers, recv):
        """INTT'd limb on src_rpau -> re-reduced coefficients on receivers."""
        if self.split:
            self.b.emit(JOIN, PIPE_MAIN, ctrl, (src_rpau,), dst=src_slots,
                        src=tuple(("slot", s) for s in src_slots))
        self.b.emit(
            BCAST, PIPE_RING, ctrl, receivers, dst=recv,
            src=tuple(("remote", src_rpau, s) for s in src_slots),
            words=len(src_slots),
        )
        if self.split:
            self.b.emit(SPLIT, PIPE_MAIN, ctrl, receivers, dst=recv,
                        src=tuple(("slot", s) for s in recv), half="m")
        self.transform(NTT, ctrl, receivers, recv)

    def mod_down(self, ctrl, acc_slots, receivers, ring, drop_rpau, drop_idx):
        """Drop the limb held by drop_rpau and divide it out of the rest."""
        self.transform(INTT, ctrl, (drop_rpau,), acc_slots)
        recv = self.recv_slots(ring)
        self.join_split_bcast(ctrl, drop_rpau, acc_slots, receivers, recv)
        self.cwise(ctrl, receivers, "sub", acc_slots, [acc_slots, recv])
        self.scale_qinv(ctrl, receivers, acc_slots, drop_idx)


def _compile_add(pset, machine, level, op_seq, name, sub=False) -> OpProgram:
    c = _OpCompiler(pset, machine, level, op_seq, "add")
    H = lambda i: _halves(pset, i)
    x0, x1, y0, y1 = H(0), H(1), H(2), H(3)
    o0, o1 = H(4), H(5)
    c.b.preload(c.limbs, x0 + x1 + y0 + y1)
    c.b.sync_ctrl(op_start=True)
    kind = "sub" if sub else "add"
    c.cwise(0, c.limbs, kind, o0, [x0, y0])
    c.cwise(0, c.limbs, kind, o1, [x1, y1])
    c.b.sync_pipes()
    c.b.sync_ctrl()
    return c.b.finish(
        "add" if not sub else "sub", name,
        inputs={"x": _ct_binding(c.limbs, x0, x1), "y": _ct_binding(c.limbs, y0, y1)},
        outputs={"out": _ct_binding(c.limbs, o0, o1)},
        level=level,
    )


def _compile_mult_plain(pset, machine, level, op_seq, name) -> OpProgram:
    c = _OpCompiler(pset, machine, level, op_seq, "mult_plain")
    H = lambda i: _halves(pset, i)
    x0, x1, pt = H(0), H(1), H(2)
    c.b.preload(c.limbs, x0 + x1 + pt)
    c.b.sync_ctrl(op_start=True)
    c.dyadic_op(1, c.limbs, "mul", x0, [x0, pt])
    c.dyadic_op(1, c.limbs, "mul", x1, [x1, pt])
    c.b.sync_pipes()
    c.b.sync_ctrl()
    return c.b.finish(
        "mult_plain", name,
        inputs={"x": _ct_binding(c.limbs, x0, x1), "pt": _pt_binding(c.limbs, pt)},
        outputs={"out": _ct_binding(c.limbs, x0, x1)},
        level=level,
    )


def _compile_mult_relin(pset, machine, level, op_seq, name) -> OpProgram:
    """Tensor product, key-switch of the quadratic part, and base merge.

    The dyadic controller owns the tensor products and the running
    accumulations; the main controller owns the transform/broadcast loop
    that walks the quadratic part through every output modulus, then the
    two sequential special-prime drops.
    """
    c = _OpCompiler(pset, machine, level, op_seq, "mult_relin")
    b = c.b
    H = lambda i: _halves(pset, i)
    x0, x1, y0, y1 = H(0), H(1), H(2), H(3)
    d2, d1 = H(4), H(5)
    d0, acc0 = x0, x1                    # overwrite inputs as they go dead
    if c.split:
        acc1 = y0
        recv_ring = (6, 7, 12)           # three buffers rotate a two-slot payload
    else:
        acc1 = y1
        recv_ring = (6, 2)               # slot 2 freed by the last tensor read
    b.preload(c.limbs, x0 + x1 + y0 + y1)
    b.sync_ctrl(op_start=True)

    # tensor product; the quadratic part first so the transform loop can start
    c.dyadic_op(1, c.limbs, "mul", d2, [x1, y1])
    c.dyadic_op(1, c.limbs, "mul", d1, [x0, y1])
    c.dyadic_op(1, c.limbs, "mac", d1, [x1, y0])
    c.dyadic_op(1, c.limbs, "mul", d0, [x0, y0])

    # quadratic part back to coefficients, one limb per RPAU, in place
    c.transform(INTT, 0, c.limbs, d2)
    if c.split:
        b.emit(JOIN, PIPE_MAIN, 0, c.limbs, dst=d2,
               src=tuple(("slot", s) for s in d2))

    for i in c.limbs:
        recv = c.recv_slots(recv_ring)
        b.emit(
            BCAST, PIPE_RING, 0, c.all_r, dst=recv,
            src=tuple(("remote", i, s) for s in d2), words=len(recv),
        )
        if c.split:
            b.emit(SPLIT, PIPE_MAIN, 0, c.all_r, dst=recv,
                   src=tuple(("slot", s) for s in recv), half="m")
        c.transform(NTT, 0, c.all_r, recv)
        # plus-half accumulations first so the ring can overwrite sooner
        for h in range(len(recv)):
            kind = "mul" if i == 0 else "mac"
            for comp, acc in ((0, acc0), (1, acc1)):
                half = "m" if (c.split and h == 1) else ""
                terms = [("slot", recv[h]), ("ksk", 0, comp, i)]
                if kind == "mac":
                    terms.append(("slot", acc[h]))
                b.emit(DYADIC, PIPE_DYADIC, 1, c.all_r, dst=(acc[h],),
                       src=tuple(terms), kind=kind, half=half)

    # two sequential special-prime drops, then fold into the linear parts
    md_ring = recv_ring
    c.mod_down(0, acc0, c.limbs, md_ring, c.sp, pset.levels)
    c.mod_down(0, acc1, c.limbs, md_ring, c.sp, pset.levels)
    c.cwise(0, c.limbs, "add", d0, [d0, acc0])
    c.cwise(0, c.limbs, "add", d1, [d1, acc1])
    b.sync_pipes()
    b.sync_ctrl()
    return b.finish(
        "mult_relin", name,
        inputs={"x": _ct_binding(c.limbs, x0, x1), "y": _ct_binding(c.limbs, y0, y1)},
        outputs={"out": _ct_binding(c.limbs, d0, d1)},
        level=level,
    )


def _compile_rescale_like(pset, machine, level, op_seq, name, drop_special) -> OpProgram:
    """Drop one limb from both components and divide it out (two branches:
    the dropped limb's RPAU transforms and broadcasts, the rest receive)."""
    kind = "moddown" if drop_special else "rescale"
    c = _OpCompiler(pset, machine, level, op_seq, kind)
    H = lambda i: _halves(pset, i)
    c0, c1 = H(0), H(1)
    ring = (H(2) + H(3))[: (3 if c.split else 2)]
    if drop_special:
        drop_rpau, drop_idx, keep = c.sp, pset.levels, c.limbs
        src_rpaus = c.all_r
    else:
        drop_rpau, drop_idx, keep = level - 1, level - 1, _limb_rpaus(level - 1)
        src_rpaus = c.limbs
    c.b.preload(src_rpaus, c0 + c1)
    c.b.sync_ctrl(op_start=True)
    for comp in (c0, c1):
        c.mod_down(0, comp, keep, ring, drop_rpau, drop_idx)
    c.b.sync_pipes()
    c.b.sync_ctrl()
    return c.b.finish(
        kind, name,
        inputs={"x": _ct_binding(src_rpaus, c0, c1)},
        outputs={"out": _ct_binding(keep, c0, c1)},
        level=level, functional=not drop_special,
    )


def _compile_rotate(pset, machine, level, op_seq, name, steps) -> OpProgram:
    """Galois map of both components, then key-switch the mapped c1."""
    c = _OpCompiler(pset, machine, level, op_seq, "rotate")
    b = c.b
    H = lambda i: _halves(pset, i)
    c0, c1, a0, a1 = H(0), H(1), H(2), H(3)
    acc0, acc1 = c0, c1                   # inputs dead once mapped
    recv_ring = (H(4) + H(5))[: (3 if c.split else 2)]
    g = pow(5, steps, 2 * pset.degree)
    b.preload(c.limbs, c0 + c1)
    b.sync_ctrl(op_start=True)
    if c.split:
        # the map crosses the half-ring boundary, so walk each component
        # through full-ring coefficients and back
        for src, dst in ((c0, a0), (c1, a1)):
            c.transform(INTT, 0, c.limbs, src)
            b.emit(JOIN, PIPE_MAIN, 0, c.limbs, dst=src,
                   src=tuple(("slot", s) for s in src))
            b.emit(AUTO, PIPE_MAIN, 0, c.limbs, dst=dst,
                   src=tuple(("slot", s) for s in src), words=2, g=g,
                   coeff_domain=True)
            b.emit(SPLIT, PIPE_MAIN, 0, c.limbs, dst=dst,
                   src=tuple(("slot", s) for s in dst), half="m")
            c.transform(NTT, 0, c.limbs, dst)
    else:
        for src, dst in ((c0, a0), (c1, a1)):
            b.emit(AUTO, PIPE_MAIN, 0, c.limbs, dst=dst,
                   src=tuple(("slot", s) for s in src), g=g)
    c.transform(INTT, 0, c.limbs, a1)
    if c.split:
        b.emit(JOIN, PIPE_MAIN, 0, c.limbs, dst=a1,
               src=tuple(("slot", s) for s in a1))
    for i in c.limbs:
        recv = c.recv_slots(recv_ring)
        b.emit(BCAST, PIPE_RING, 0, c.all_r, dst=recv,
               src=tuple(("remote", i, s) for s in a1), words=len(recv))
        if c.split:
            b.emit(SPLIT, PIPE_MAIN, 0, c.all_r, dst=recv,
                   src=tuple(("slot", s) for s in recv), half="m")
        c.transform(NTT, 0, c.all_r, recv)
        for h in range(len(recv)):
            kind = "mul" if i == 0 else "mac"
            for comp, acc in ((0, acc0), (1, acc1)):
                half = "m" if (c.split and h == 1) else ""
                terms = [("slot", recv[h]), ("ksk", steps, comp, i)]
                if kind == "mac":
                    terms.append(("slot", acc[h]))
                b.emit(DYADIC, PIPE_DYADIC, 1, c.all_r, dst=(acc[h],),
                       src=tuple(terms), kind=kind, half=half)
    c.mod_down(0, acc0, c.limbs, recv_ring, c.sp, pset.levels)
    c.mod_down(0, acc1, c.limbs, recv_ring, c.sp, pset.levels)
    c.cwise(0, c.limbs, "add", a0, [a0, acc0])
    b.sync_pipes()
    b.sync_ctrl()
    return b.finish(
        "rotate", name,
        inputs={"x": _ct_binding(c.limbs, c0, c1)},
        outputs={"out": _ct_binding(c.limbs, a0, acc1)},
        level=level, steps=steps, galois=g,
    )


def _compile_ntt_bench(pset, machine, op_seq) -> OpProgram:
    c = _OpCompiler(pset, machine, pset.levels, op_seq, "ntt")
    s = _halves(pset, 0)[:1]
    c.b.preload((0,), s)
    c.b.emit(NTT, PIPE_MAIN, 0, (0,), dst=s, src=(("slot", s[0]),))
    return c.b.finish("ntt", "ntt", inputs={}, outputs={}, functional=False)


# ---------------------------------------------------------------------------
# workload-level compilation

_BENCH_LEVEL_OPS = {"add", "sub", "mult_relin", "rescale", "moddown", "rotate",
                    "mult_plain"}


def compile_op(pset: ParamSet, op: str, level: Optional[int] = None,
               machine: Optional[MachineConfig] = None, op_seq: int = 0,
               name: Optional[str] = None, steps: int = 1) -> OpProgram:
    machine = machine or MachineConfig()
    level = pset.levels if level is None else level
    name = name or op
    if op in ("add", "sub"):
        return _compile_add(pset, machine, level, op_seq, name, sub=op == "sub")
    if op == "mult_plain":
        return _compile_mult_plain(pset, machine, level, op_seq, name)
    if op == "mult_relin":
        return _compile_mult_relin(pset, machine, level, op_seq, name)
    if op == "rescale":
        return _compile_rescale_like(pset, machine, level, op_seq, name, False)
    if op == "moddown":
        return _compile_rescale_like(pset, machine, level, op_seq, name, True)
    if op == "rotate":
        return _compile_rotate(pset, machine, level, op_seq, name, steps)
    if op == "ntt":
        return _compile_ntt_bench(pset, machine, op_seq)
    raise UnsupportedOpError(f"unknown operation {op!r}")


def compile_workload(pset: ParamSet, ops: Sequence[dict],
                     machine: Optional[MachineConfig] = None) -> Program:
    """Compile a list of op specs {op, name?, level?, steps?, in/out vars}."""
    machine = machine or MachineConfig()
    compiled = []
    for seq, spec in enumerate(ops):
        op = spec["op"]
        prog = compile_op(
            pset, op, level=spec.get("level"), machine=machine, op_seq=seq,
            name=spec.get("name", f"{op}[{seq}]"), steps=spec.get("steps", 1),
        )
        prog.meta["vars"] = {
            k: spec[k] for k in ("x", "y", "pt", "out") if k in spec
        }
        prog.meta["pt_scale"] = spec.get("pt_scale")
        compiled.append(prog)
    if compiled:
        last = compiled[-1]
        uid = max((i.uid for s in last.streams for i in s), default=-1) + 1
        for ctrl in (0, 1):
            last.streams[ctrl].append(
                Instruction(op=END, pipe=PIPE_NONE, ctrl=ctrl, rpaus=(),
                            uid=uid + ctrl, op_seq=len(compiled) - 1)
            )
    return Program(pset=pset, machine=machine, ops=compiled)


# ---------------------------------------------------------------------------
# simulation

def simulate(program: Program, cost: Optional[CostModel] = None,
             serial: bool = False, clock_mhz: Optional[float] = None,
             _order_out: Optional[list] = None) -> CycleReport:
    """Run the two controller streams through the machine's resources.

    Returns exact cycle totals; raises DependencyCycleError when neither
    controller can make progress. With serial=True every costed
    instruction additionally serializes on one global resource, which is
    the single-issue baseline the dual-issue comparison uses.
    """
    cost = cost or CostModel()
    machine = program.machine
    clock = clock_mhz or machine.clock_mhz
    pipe_free: dict = {}
    busy = {PIPE_MAIN: 0, PIPE_DYADIC: 0, PIPE_RING: 0}
    histogram: dict[str, dict] = {}
    per_op: dict[int, dict] = {}
    t_end = 0

    for opp in program.ops:
        streams = opp.streams
        started: dict[int, int] = {}
        retired: dict[int, int] = {}
        ptr = [0, 0]
        last_start = [t_end, t_end]
        fence = [t_end, t_end]
        own_retire = [t_end, t_end]
        op_t0, op_t1 = None, t_end

        def candidate(c: int):
            ins = streams[c][ptr[c]]
            if ins.op == SYNC_CTRL:
                o = 1 - c
                if ptr[o] >= len(streams[o]):
                    return None, None
                partner = streams[o][ptr[o]]
                if partner.op != SYNC_CTRL or partner.meta["sync_id"] != ins.meta["sync_id"]:
                    return None, None
                t = max(last_start[c], fence[c], last_start[o], fence[o])
                return t, ("rendezvous", None)
            if ins.op in (SYNC_PIPES, END):
                return max(own_retire[c], fence[c], last_start[c]), ("drain", None)
            t = max(last_start[c], fence[c])
            why = ("order", None)
            for d in ins.deps:
                if d not in retired:
                    return None, None
                if retired[d] > t:
                    t, why = retired[d], ("dep", d)
            keys = [("ring",)] if ins.pipe == PIPE_RING else [
                (r, ins.pipe) for r in ins.rpaus
            ]
            if serial:
                keys.append(("serial",))
            for k in keys:
                ft = pipe_free.get(k, 0)
                if ft > t:
                    t, why = ft, ("pipe", k)
            return t, why

        while ptr[0] < len(streams[0]) or ptr[1] < len(streams[1]):
            best, who, why = None, None, None
            for c in (0, 1):
                if ptr[c] >= len(streams[c]):
                    continue
                t, reason = candidate(c)
                if t is not None and (best is None or t < best):
                    best, who, why = t, c, reason
            if who is None:
                raise DependencyCycleError(
                    f"controllers deadlocked in {opp.name} at "
                    f"instructions {ptr[0]}/{len(streams[0])} and {ptr[1]}/{len(streams[1])}"
                )
            ins = streams[who][ptr[who]]
            if ins.op == SYNC_CTRL:
                other = 1 - who
                partner = streams[other][ptr[other]]
                dur = cost.op_overhead if ins.meta.get("op_start") else 0
                for c, i2 in ((who, ins), (other, partner)):
                    started[i2.uid] = best
                    retired[i2.uid] = best + dur
                    fence[c] = best + dur
                    own_retire[c] = max(own_retire[c], best + dur)
                    ptr[c] += 1
                _bump_hist(histogram, SYNC_CTRL, 0, 2)
                if _order_out is not None:
                    _order_out.extend([(opp, ins), (opp, partner)])
                op_t1 = max(op_t1, best + dur)
                if op_t0 is None:
                    op_t0 = best
                continue
            dur = 0 if ins.op in _SYNC_OPS else cost.cost(ins)
            start = best
            retire = start + dur
            started[ins.uid] = start
            retired[ins.uid] = retire
            ptr[who] += 1
            if ins.op in (SYNC_PIPES, END):
                fence[who] = retire
            else:
                last_start[who] = start
                keys = [("ring",)] if ins.pipe == PIPE_RING else [
                    (r, ins.pipe) for r in ins.rpaus
                ]
                if serial:
                    keys.append(("serial",))
                for k in keys:
                    pipe_free[k] = retire
                busy[ins.pipe] += dur
            own_retire[who] = max(own_retire[who], retire)
            _bump_hist(histogram, ins.op, dur, 1)
            if _order_out is not None:
                _order_out.append((opp, ins))
            if op_t0 is None:
                op_t0 = start
            op_t1 = max(op_t1, retire)

        # high-level ops execute back to back: later ops wait for the bar
        t_end = op_t1
        per_op[id(opp)] = {
            "name": opp.name, "kind": opp.kind,
            "start": op_t0 if op_t0 is not None else t_end,
            "end": op_t1,
            "cycles": op_t1 - (op_t0 if op_t0 is not None else op_t1),
            "_retired": retired, "_started": started, "_streams": streams,
        }

    per_op_list = []
    for opp in program.ops:
        entry = per_op[id(opp)]
        per_op_list.append({k: entry[k] for k in ("name", "kind", "start", "end", "cycles")})

    critical = _critical_path(program, per_op)
    hw = program.high_water()
    report = CycleReport(
        total_cycles=t_end,
        per_pipe_busy=busy,
        op_histogram=histogram,
        per_op=per_op_list,
        critical_path=critical,
        memory_high_water={
            "per_rpau": hw,
            "max": max(hw.values(), default=0),
            "budget": machine.rpm_slots,
        },
        instruction_count=program.instruction_count,
        clock_mhz=clock,
        serial=serial,
    )
    return report


def _bump_hist(histogram, op, cycles, count):
    h = histogram.setdefault(op, {"count": 0, "cycles": 0})
    h["count"] += count
    h["cycles"] += cycles


def _critical_path(program: Program, per_op: dict, limit: int = 48) -> list[str]:
    """Walk back from the final retire through each instruction's binding
    dependency, falling back to the latest earlier retire on the same pipe."""
    entries: list[str] = []
    for opp in reversed(program.ops):
        data = per_op[id(opp)]
        retired, started = data["_retired"], data["_started"]
        if not retired:
            continue
        by_uid = {i.uid: i for s in data["_streams"] for i in s}
        uid = max(retired, key=lambda u: (retired[u], u))
        while uid is not None and len(entries) < limit:
            ins = by_uid[uid]
            if ins.op not in _SYNC_OPS:
                entries.append(
                    f"{opp.name}: {ins.label()} "
                    f"[{started[uid]}..{retired[uid]}]"
                )
            pred, best = None, -1
            for d in ins.deps:
                if d in retired and retired[d] > best:
                    best, pred = retired[d], d
            if pred is None:
                t0 = started[uid]
                for u2, t2 in retired.items():
                    if u2 == uid or t2 > t0 or t2 <= best:
                        continue
                    other = by_uid[u2]
                    if ins.pipe != PIPE_NONE and other.pipe != ins.pipe:
                        continue
                    best, pred = t2, u2
            uid = pred
        if len(entries) >= limit:
            break
    entries.reverse()
    return entries


# ---------------------------------------------------------------------------
# derived analyses

def dual_issue_savings(program: Program, cost: Optional[CostModel] = None) -> dict:
    cost = cost or CostModel()
    dual = simulate(program, cost)
    ser = simulate(program, cost, serial=True)
    s, d = ser.total_cycles, dual.total_cycles
    return {
        "serial_cycles": s,
        "dual_cycles": d,
        "savings": (s - d) / s if s else 0.0,
    }


def memory_audit(program: Program) -> dict:
    hw = program.high_water()
    uses_ksk = any(
        term[0] == "ksk"
        for op in program.ops for st in op.streams for i in st for term in i.src
    )
    return {
        "per_rpau": hw,
        "max": max(hw.values(), default=0),
        "budget": program.machine.rpm_slots,
        "ksk_resident_polys": 2 * program.pset.levels if uses_ksk else 0,
        "ksk_regenerated_from_seed": True,
    }


# ---------------------------------------------------------------------------
# functional execution of compiled streams

@dataclass
class _ParentHalf:
    """Half of a full-ring coefficient vector riding in one RPM slot."""
    q: PrimeModulus
    coeffs: np.ndarray


def _exec_order(streams) -> list[Instruction]:
    """Any dependency-respecting linearization; arithmetic is exact so all
    such orders produce identical values."""
    ptr = [0, 0]
    done: set[int] = set()
    out: list[Instruction] = []
    while ptr[0] < len(streams[0]) or ptr[1] < len(streams[1]):
        progress = False
        for c in (0, 1):
            while ptr[c] < len(streams[c]):
                ins = streams[c][ptr[c]]
                if ins.op in _SYNC_OPS:
                    ptr[c] += 1
                    progress = True
                    continue
                if all(d in done for d in ins.deps):
                    out.append(ins)
                    done.add(ins.uid)
                    ptr[c] += 1
                    progress = True
                    continue
                break
        if not progress:
            raise DependencyCycleError("functional execution deadlocked")
    return out


class _Executor:
    def __init__(self, engine, program: Program):
        self.eng = engine
        self.pset = program.pset
        self.machine = program.machine
        self.base = engine.base

    def rpau_modulus_idx(self, rpau: int) -> int:
        if rpau == self.machine.special_rpau:
            return self.base.levels
        return rpau

    def rpau_q(self, rpau: int) -> PrimeModulus:
        return self.base.all_moduli[self.rpau_modulus_idx(rpau)]

    def ksk_operand(self, ksk_id, comp, i, rpau, half):
        key = self.eng.relin_key if ksk_id == 0 else self.eng.rotation_keys[ksk_id]
        grid = key.secret if comp == 0 else key.uniform
        limb = grid[i][self.rpau_modulus_idx(rpau)]
        if isinstance(limb, SplitPair):
            return limb.minus if half == "m" else limb.plus
        return limb

    def run(self, opp: OpProgram, state: dict) -> None:
        for ins in _exec_order(opp.streams):
            self.step(ins, state, opp)

    def step(self, ins: Instruction, state: dict, opp: OpProgram) -> None:
        if ins.op in (NTT, INTT):
            fwd = ins.op == NTT
            for r in ins.rpaus:
                x = state[(r, ins.dst[0])]
                state[(r, ins.dst[0])] = ntt_forward(x) if fwd else ntt_inverse(x)
        elif ins.op in (CWISE, DYADIC):
            for r in ins.rpaus:
                ops = []
                acc = None
                for term in ins.src:
                    if term[0] == "slot":
                        ops.append(state[(r, term[1])])
                    elif term[0] == "ksk":
                        ops.append(self.ksk_operand(*term[1:], rpau=r, half=ins.half))
                if ins.kind == "mac":
                    acc = ops.pop()
                a, bb = ops
                state[(r, ins.dst[0])] = dyadic(ins.kind, a, bb, acc)
        elif ins.op == SCALE_QINV:
            drop = ins.meta["drop_idx"]
            for r in ins.rpaus:
                j = self.rpau_modulus_idx(r)
                state[(r, ins.dst[0])] = scalar_mul(
                    state[(r, ins.dst[0])], self.base.inv[drop][j]
                )
        elif ins.op == BCAST:
            src_r = ins.src[0][1]
            parts = [state[(src_r, t[2])] for t in ins.src]
            if isinstance(parts[0], _ParentHalf):
                coeffs = np.concatenate([p.coeffs for p in parts])
            else:
                coeffs = parts[0].coeffs
            q_src = parts[0].q
            signed = _centered_int64(coeffs, q_src.value)
            for r in ins.rpaus:
                q_r = self.rpau_q(r)
                res = signed_to_residues(signed, q_r.value)
                if len(ins.dst) == 2:
                    h = len(res) // 2
                    state[(r, ins.dst[0])] = _ParentHalf(q_r, res[:h].copy())
                    state[(r, ins.dst[1])] = _ParentHalf(q_r, res[h:].copy())
                else:
                    state[(r, ins.dst[0])] = ResiduePoly(q_r, res, "coeff", STANDARD)
        elif ins.op == SPLIT:
            for r in ins.rpaus:
                lo = state[(r, ins.src[0][1])]
                hi = state[(r, ins.src[1][1])]
                parent = ResiduePoly(
                    lo.q, np.concatenate([lo.coeffs, hi.coeffs]), "coeff", STANDARD
                )
                pair = split(parent)
                state[(r, ins.dst[0])] = pair.plus
                state[(r, ins.dst[1])] = pair.minus
        elif ins.op == JOIN:
            for r in ins.rpaus:
                pair = SplitPair(state[(r, ins.src[0][1])], state[(r, ins.src[1][1])])
                parent = join(pair)
                h = parent.n // 2
                state[(r, ins.dst[0])] = _ParentHalf(parent.q, parent.coeffs[:h].copy())
                state[(r, ins.dst[1])] = _ParentHalf(parent.q, parent.coeffs[h:].copy())
        elif ins.op == AUTO:
            g = ins.meta["g"]
            for r in ins.rpaus:
                if ins.meta.get("coeff_domain"):
                    lo = state[(r, ins.src[0][1])]
                    hi = state[(r, ins.src[1][1])]
                    parent = ResiduePoly(
                        lo.q, np.concatenate([lo.coeffs, hi.coeffs]), "coeff", STANDARD
                    )
                    mapped = automorphism_coeff(parent, g)
                    h = mapped.n // 2
                    state[(r, ins.dst[0])] = _ParentHalf(mapped.q, mapped.coeffs[:h].copy())
                    state[(r, ins.dst[1])] = _ParentHalf(mapped.q, mapped.coeffs[h:].copy())
                else:
                    state[(r, ins.dst[0])] = automorphism(state[(r, ins.src[0][1])], g)
        else:
            raise UnsupportedOpError(f"cannot execute {ins.op}")


def _seed_binding(state, binding, value):
    if binding["kind"] == "ct":
        comps = [value.c0, value.c1]
    else:
        comps = [value.limbs]
    for comp, places in zip(comps, binding["components"]):
        for limb, (rpau, slots) in zip(comp, places):
            if isinstance(limb, SplitPair):
                state[(rpau, slots[0])] = limb.plus.copy()
                state[(rpau, slots[1])] = limb.minus.copy()
            else:
                state[(rpau, slots[0])] = limb.copy()


def _read_ct(state, binding, scale) -> Ciphertext:
    comps = []
    for places in binding["components"]:
        limbs = []
        for rpau, slots in places:
            if len(slots) == 2:
                limbs.append(
                    SplitPair(state[(rpau, slots[0])], state[(rpau, slots[1])])
                )
            else:
                limbs.append(state[(rpau, slots[0])])
        comps.append(limbs)
    return Ciphertext(comps[0], comps[1], scale)


def execute_workload(engine, program: Program, variables: dict) -> dict:
    """Run every compiled op on real ciphertext data.

    `variables` maps var names to Ciphertext/Plaintext values and is
    updated with each op's output; the result is the final mapping. Ops
    compiled latency-only (functional=False) are skipped.
    """
    ex = _Executor(engine, program)
    variables = dict(variables)
    for opp in program.ops:
        if not opp.functional:
            continue
        names = opp.meta.get("vars", {})
        state: dict = {}
        ct_x = variables[names.get("x", "x")] if "x" in opp.inputs else None
        for var, binding in opp.inputs.items():
            _seed_binding(state, binding, variables[names.get(var, var)])
        ex.run(opp, state)
        out_name = names.get("out", "out")
        if opp.kind in ("add", "sub"):
            y = variables[names.get("y", "y")]
            scale = ct_x.scale
            if y.scale != scale:
                raise ArchSimError("operand scales differ")
        elif opp.kind == "mult_relin":
            scale = ct_x.scale * variables[names.get("y", "y")].scale
        elif opp.kind == "mult_plain":
            scale = ct_x.scale * variables[names.get("pt", "pt")].scale
        elif opp.kind == "rescale":
            scale = ct_x.scale / engine.base.primes[opp.meta["level"] - 1].value
        else:
            scale = ct_x.scale
        variables[out_name] = _read_ct(state, opp.outputs["out"], scale)
    return variables
