"""Instance files, SVG rendering and JSON reports.

Instance schema::

    {"name": str, "height": num, "rotation_step_deg": num,
     "pieces": [{"vertices": [[x, y], ...], "count": int}, ...]}

``rotation_step_deg`` and ``count`` are optional (defaults 90 and 1).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .geometry import GeometryError, Polygon
from .packing import Layout, layout_metrics
from .pipeline import SolveReport

REPORT_SCHEMA = "opusnest.report/1"
SVG_VERSION = "1"


class ParseError(ValueError):
    """Invalid instance document; ``path`` locates the offending JSON node."""

    category = "parse"

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class InstanceFile:
    name: str
    height: float
    pieces: list[list[tuple[float, float]]]
    counts: list[int] = field(default_factory=list)
    rotation_step_deg: float | None = None

    def __post_init__(self) -> None:
        if not self.counts:
            self.counts = [1] * len(self.pieces)

    def polygons(self) -> list[Polygon]:
        """Flat piece list with multiplicities expanded in file order."""
        out = []
        for verts, c in zip(self.pieces, self.counts):
            poly = Polygon(verts)
            out.extend([poly] * c)
        return out


def _num(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ParseError(path, f"expected a finite number, got {v!r}")
    return float(v)


def parse_instance(data: bytes | str) -> InstanceFile:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError("$", f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("$", "top level must be an object")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ParseError("$.name", "must be a string")
    if "height" not in doc:
        raise ParseError("$.height", "missing")
    height = _num(doc["height"], "$.height")
    if height <= 0:
        raise ParseError("$.height", f"must be positive, got {height:g}")
    step = None
    if doc.get("rotation_step_deg") is not None:
        step = _num(doc["rotation_step_deg"], "$.rotation_step_deg")
        if step <= 0 or step > 360:
            raise ParseError("$.rotation_step_deg", "must lie in (0, 360]")
    pieces_doc = doc.get("pieces")
    if not isinstance(pieces_doc, list) or not pieces_doc:
        raise ParseError("$.pieces", "must be a non-empty list")
    pieces, counts = [], []
    for k, pd in enumerate(pieces_doc):
        base = f"$.pieces[{k}]"
        if not isinstance(pd, dict) or "vertices" not in pd:
            raise ParseError(base, "must be an object with 'vertices'")
        verts_doc = pd["vertices"]
        if not isinstance(verts_doc, list):
            raise ParseError(f"{base}.vertices", "must be a list of [x, y] pairs")
        verts = []
        for m, v in enumerate(verts_doc):
            if not isinstance(v, (list, tuple)) or len(v) != 2:
                raise ParseError(f"{base}.vertices[{m}]", "must be an [x, y] pair")
            verts.append((_num(v[0], f"{base}.vertices[{m}][0]"), _num(v[1], f"{base}.vertices[{m}][1]")))
        try:
            Polygon(verts)
        except GeometryError as exc:
            raise ParseError(f"{base}.vertices", f"piece {k}: {exc}") from exc
        count = pd.get("count", 1)
        if isinstance(count, bool) or not isinstance(count, int) or count < 1:
            raise ParseError(f"{base}.count", f"must be an integer >= 1, got {count!r}")
        pieces.append(verts)
        counts.append(count)
    return InstanceFile(name, height, pieces, counts, step)


def load_instance(path: str | os.PathLike) -> InstanceFile:
    return parse_instance(Path(path).read_bytes())


def dump_instance(inst: InstanceFile) -> str:
    doc = {"name": inst.name, "height": inst.height}
    if inst.rotation_step_deg is not None:
        doc["rotation_step_deg"] = inst.rotation_step_deg
    doc["pieces"] = [{"vertices": [[x, y] for x, y in v], "count": c} for v, c in zip(inst.pieces, inst.counts)]
    return json.dumps(doc, indent=2)


def bundled_instance(name: str) -> Path:
    """Path of a bundled instance such as ``"puzzle1"``."""
    return Path(__file__).parent / "instances" / f"{name}.json"


# ---------------------------------------------------------------- SVG

_PALETTE = ("#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462",
            "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f")


def _f(v: float) -> str:
    s = f"{v:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render_svg(layout: Layout, title: str | None = None) -> str:
    L, W, ratio = layout_metrics(layout)
    H = layout.height
    label = title or f"L={L:.2f}, waste={100 * ratio:.2f}%"
    stroke = _f(max(L, H) / 500.0)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {_f(L)} {_f(H)}" '
        f'width="{_f(L)}" height="{_f(H)}" data-generator="opusnest-svg/{SVG_VERSION}">',
        f"  <title>{label}</title>",
        f'  <rect x="0" y="0" width="{_f(L)}" height="{_f(H)}" fill="none" stroke="#000" stroke-width="{stroke}"/>',
    ]
    for i, poly in enumerate(layout.placed):
        pts = " ".join(f"{_f(x)},{_f(H - y)}" for x, y in poly.coords)
        color = _PALETTE[i % len(_PALETTE)]
        lines.append(f'  <polygon data-piece="{i}" points="{pts}" fill="{color}" '
                     f'stroke="#333" stroke-width="{stroke}"/>')
    fs = _f(max(L, H) / 40.0)
    lines.append(f'  <text x="{fs}" y="{_f(2 * float(fs))}" font-size="{fs}" font-family="monospace">{label}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(layout: Layout, path: str | os.PathLike, title: str | None = None) -> None:
    Path(path).write_text(render_svg(layout, title))


# ---------------------------------------------------------------- reports

def report_to_dict(report: SolveReport, layout: Layout | None = None) -> dict:
    d = asdict(report)
    d["schema"] = REPORT_SCHEMA
    d["waste_percent"] = report.waste_percent
    if layout is not None:
        d["poses"] = [[q.x, q.y, q.angle] for q in layout.poses]
    return d


def write_report(report: SolveReport, path: str | os.PathLike, layout: Layout | None = None) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report, layout), indent=2, sort_keys=True))


def read_report(path: str | os.PathLike) -> SolveReport:
    d = json.loads(Path(path).read_text())
    if d.get("schema") != REPORT_SCHEMA:
        raise ParseError("$.schema", f"unsupported report schema {d.get('schema')!r}")
    fields = SolveReport.__dataclass_fields__
    return SolveReport(**{k: v for k, v in d.items() if k in fields})
