"""Worst-case bit bounds of backpropagated versus DFA deltas.

With e-bit errors and w-bit weights, each multiplication by a weight matrix
on the way back adds w bits, so a BP delta ``hops`` weight matrices away from
the output needs ``e + hops * w`` bits. A DFA delta is one product of the error
with an r-bit feedback matrix at every depth: ``e + r`` bits.

Like the analysis it reproduces, these bounds leave out the log2(fan-in) growth
of summing many products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

FOOTNOTE = "bounds ignore the log2(fan-in) growth from summing products over layer width"
WIDE_LAYER_BITS = 16


def bp_bound_bits(e: int, w: int, hops: int) -> int:
    if e < 1 or w < 1 or hops < 0:
        raise ValueError("need e, w >= 1 and hops >= 0")
    return e + hops * w


def dfa_bound_bits(e: int, r: int) -> int:
    if e < 1 or r < 1:
        raise ValueError("need e, r >= 1")
    return e + r


@dataclass(frozen=True)
class LayerBound:
    hidden_layer: int
    hops_from_output: int
    bp_bound_bits: int
    dfa_bound_bits: int
    bp_overflows: bool
    dfa_overflows: bool


@dataclass(frozen=True)
class OverflowReport:
    layers: list[LayerBound]
    e: int
    w: int
    r: int
    accumulator_bits: int
    footnote: str = FOOTNOTE
    warnings: list[str] = field(default_factory=list)

    @property
    def bp_flagged(self) -> list[int]:
        return [lb.hidden_layer for lb in self.layers if lb.bp_overflows]

    @property
    def dfa_flagged(self) -> list[int]:
        return [lb.hidden_layer for lb in self.layers if lb.dfa_overflows]


def audit(
    num_hidden_layers: int,
    e: int,
    w: int,
    r: int,
    accumulator_bits: int,
    widths: list[int] | None = None,
) -> OverflowReport:
    """Bounds for hidden layers 1 (farthest from the output) .. num_hidden_layers.

    Hidden layer j sits ``num_hidden_layers - j + 1`` weight matrices away from
    the output delta. A layer is flagged when its bound strictly exceeds the
    accumulator width. ``widths`` (optional layer sizes) only feeds a warning
    for layers wider than 2**16, where the DFA bound stops being meaningful.
    """
    for name, v in (("num_hidden_layers", num_hidden_layers), ("e", e), ("w", w), ("r", r), ("accumulator_bits", accumulator_bits)):
        if v < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")
    dfa = dfa_bound_bits(e, r)
    layers = []
    for j in range(1, num_hidden_layers + 1):
        hops = num_hidden_layers - j + 1
        bp = bp_bound_bits(e, w, hops)
        layers.append(LayerBound(j, hops, bp, dfa, bp > accumulator_bits, dfa > accumulator_bits))
    warnings = []
    for i, width in enumerate(widths or []):
        if width > 1 << WIDE_LAYER_BITS:
            warnings.append(f"layer {i} has {width} nodes (> 2**{WIDE_LAYER_BITS}); DFA deltas may exceed the bound")
    return OverflowReport(layers, e, w, r, accumulator_bits, warnings=warnings)


_COLUMNS = ("hidden_layer", "hops", "bp_bits", "dfa_bits", "bp_overflow", "dfa_overflow")


def _rows(report: OverflowReport) -> list[tuple]:
    return [
        (lb.hidden_layer, lb.hops_from_output, lb.bp_bound_bits, lb.dfa_bound_bits,
         "yes" if lb.bp_overflows else "no", "yes" if lb.dfa_overflows else "no")
        for lb in report.layers
    ]


def format_table(report: OverflowReport) -> str:
    rows = [tuple(str(c) for c in row) for row in _rows(report)]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(_COLUMNS)]
    lines = [
        f"e={report.e} w={report.w} r={report.r} accumulator={report.accumulator_bits} bits",
        "  ".join(h.rjust(n) for h, n in zip(_COLUMNS, widths)),
    ]
    lines += ["  ".join(c.rjust(n) for c, n in zip(row, widths)) for row in rows]
    lines.append(f"note: {report.footnote}")
    lines += [f"warning: {msg}" for msg in report.warnings]
    return "\n".join(lines)


def format_csv(report: OverflowReport) -> str:
    lines = [",".join(_COLUMNS)]
    lines += [",".join(str(c) for c in row) for row in _rows(report)]
    return "\n".join(lines)
