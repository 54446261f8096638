"""CSV/JSON serialisation of result records.

Floats are written with 17 significant digits so that a reload reproduces
the stored doubles exactly.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

from .dynamics import CycleRecord, FixedPointRecord, PreimageSet
from .zalcman import RenormStep, StepDiagnostics

FIXED_POINT_COLUMNS = ["re_q", "im_q", "residual", "re_m", "im_m", "abs_m", "class", "annulus"]
CYCLE_COLUMNS = ["re_q", "im_q", "re_partner", "im_partner", "residual", "re_m", "im_m", "abs_m", "class", "annulus"]
PREIMAGE_COLUMNS = ["re_w", "im_w", "re_dg", "im_dg", "critical"]
RENORM_COLUMNS = ["lambda", "re_xi", "im_xi", "re_vn", "im_vn", "rn", "g_sharp_vn",
                  "h_sharp_0", "sup_h_sharp", "omitted_gap"]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write(path: Path | None, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(c) if isinstance(c, float) else c for c in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def fixed_points_csv(records: Sequence[FixedPointRecord], path: Path | None = None) -> str:
    return _write(path, FIXED_POINT_COLUMNS, (
        (r.q.real, r.q.imag, r.residual, r.multiplier.real, r.multiplier.imag, abs(r.multiplier),
         r.classification, r.annulus) for r in records))


def cycles_csv(records: Sequence[CycleRecord], path: Path | None = None) -> str:
    return _write(path, CYCLE_COLUMNS, (
        (r.q.real, r.q.imag, r.partner.real, r.partner.imag, r.residual, r.multiplier.real,
         r.multiplier.imag, abs(r.multiplier), r.classification, r.annulus) for r in records))


def preimages_csv(pre: PreimageSet, path: Path | None = None) -> str:
    return _write(path, PREIMAGE_COLUMNS, (
        (m.w.real, m.w.imag, m.derivative.real, m.derivative.imag, int(m.critical)) for m in pre.members))


def renorm_csv(steps: Sequence[RenormStep], diagnostics: Sequence[StepDiagnostics], path: Path | None = None) -> str:
    return _write(path, RENORM_COLUMNS, (
        (s.lam, s.xi.real, s.xi.imag, s.vn.real, s.vn.imag, s.rn, s.spherical_at_vn, d.h_sharp_at_zero,
         d.sup_spherical_on_disk, "" if d.omitted_gap is None else float(d.omitted_gap))
        for s, d in zip(steps, diagnostics)))


def _rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_fixed_points_csv(path: Path) -> list[FixedPointRecord]:
    return [FixedPointRecord(complex(float(r["re_q"]), float(r["im_q"])), float(r["residual"]),
                             complex(float(r["re_m"]), float(r["im_m"])), r["class"], int(r["annulus"]))
            for r in _rows(path)]


def read_cycles_csv(path: Path) -> list[CycleRecord]:
    return [CycleRecord(complex(float(r["re_q"]), float(r["im_q"])),
                        complex(float(r["re_partner"]), float(r["im_partner"])), float(r["residual"]),
                        complex(float(r["re_m"]), float(r["im_m"])), r["class"], int(r["annulus"]))
            for r in _rows(path)]


def to_jsonable(obj):
    """Dataclasses, complex numbers and containers to plain JSON types."""
    if hasattr(obj, "__dataclass_fields__"):
        return {k: to_jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return to_jsonable(obj.item())
    return obj


def write_json(obj, path: Path) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
