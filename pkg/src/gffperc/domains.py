"""Named domain presets and the textual domain / vertex-set syntax.

Domain strings::

    box:<dim>x<side>[x<side>...][:mode]     lattice box (one side is broadcast)
    glued:<dim>x<side>[x<side>...][:mode]   two boxes joined by one edge
    file:<path>                             edge-list file
    <preset>                                a name from PRESETS

Vertex-set strings are comma separated items, each a vertex id, a letter
(``a`` is the first interior vertex, ``b`` the second, ...), ``center``
(the central vertex) or ``center:k`` (the central ``k``-block).
"""
from __future__ import annotations

import string
from pathlib import Path

import numpy as np

from .graph import MODES, Graph, GraphError, build_box, build_glued_boxes, load_edge_list, vertex_set

EDGE_TEXT = "0 1\n#boundary\n1\n"

# name -> (builder, default central block size)
PRESETS = {
    "single": (lambda: build_box(2, [1, 1]), 1),
    "edge": (lambda: load_edge_list(EDGE_TEXT), 1),
    "pair": (lambda: build_box(1, [2]), 1),
    "path3": (lambda: build_box(1, [3]), 1),
    "path5": (lambda: build_box(1, [5]), 1),
    "box2": (lambda: build_box(2, [2, 2]), 1),
    "box3": (lambda: build_box(2, [3, 3]), 1),
    "box4": (lambda: build_box(2, [4, 4]), 2),
    "box5": (lambda: build_box(2, [5, 5]), 1),
    "glued4": (lambda: build_glued_boxes(2, [4, 4]), 2),
}


def _parse_sides(body: str) -> tuple[int, list[int]]:
    try:
        parts = [int(p) for p in body.split("x")]
    except ValueError:
        raise GraphError(f"cannot parse box size {body!r}") from None
    if len(parts) < 2:
        raise GraphError(f"box size {body!r} needs <dim>x<side>")
    dim, sides = parts[0], parts[1:]
    if len(sides) == 1:
        sides = sides * dim
    return dim, sides


def parse_domain(text: str) -> Graph:
    """Build the graph described by a domain string."""
    text = text.strip()
    if text in PRESETS:
        return PRESETS[text][0]()
    kind, _, rest = text.partition(":")
    if kind == "file":
        return load_edge_list(Path(rest).read_text(encoding="utf-8"))
    if kind in ("box", "glued"):
        body, _, mode = rest.partition(":")
        mode = mode or "dirichlet-halo"
        if mode not in MODES:
            raise GraphError(f"unknown mode {mode!r}")
        dim, sides = _parse_sides(body)
        build = build_box if kind == "box" else build_glued_boxes
        return build(dim, sides, mode)
    raise GraphError(f"unknown domain {text!r}; presets are {sorted(PRESETS)}")


def default_block(text: str) -> int:
    return PRESETS[text][1] if text in PRESETS else 1


def center_block(g: Graph, k: int = 1, glued: bool = False) -> np.ndarray:
    """Central ``k^d`` block of interior vertices, using coordinate labels.

    With ``glued=True`` labels are read as ``(copy, *coords)`` and the block
    is taken in copy 0.  Graphs without labels fall back to the ``k``
    interior vertices of median id.
    """
    interior = g.interior
    if len(interior) == 0:
        raise GraphError("graph has no interior")
    if k < 1:
        raise ValueError("block size must be >= 1")
    if g.labels is None:
        lo = max(0, len(interior) // 2 - k // 2)
        return interior[lo : lo + k]
    ids = np.array([i for i in interior if not glued or g.labels[i][0] == 0])
    coords = np.array([g.labels[i][1:] if glued else g.labels[i] for i in ids])
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    start = (lo + hi + 1 - k) // 2
    inside = np.all((coords >= start) & (coords < start + k), axis=1)
    return np.sort(ids[inside])


def is_glued(text: str) -> bool:
    text = text.strip()
    return text.startswith("glued:") or (text in PRESETS and text.startswith("glued"))


def parse_set(g: Graph, text: str, glued: bool = False) -> np.ndarray:
    """Vertex set from the comma-separated syntax described in the module docstring."""
    out: list[int] = []
    interior = g.interior
    for item in filter(None, (s.strip() for s in text.split(","))):
        if item == "center" or item.startswith("center:"):
            k = int(item.partition(":")[2] or 1)
            out.extend(int(v) for v in center_block(g, k, glued))
        elif item.isdigit():
            out.append(int(item))
        elif len(item) == 1 and item in string.ascii_lowercase:
            i = string.ascii_lowercase.index(item)
            if i >= len(interior):
                raise GraphError(f"interior has no vertex {item!r}")
            out.append(int(interior[i]))
        else:
            raise GraphError(f"cannot parse vertex {item!r}")
    return vertex_set(g, out)
