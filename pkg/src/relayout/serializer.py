"""HTML-style sequences for relation trees and salient blocks.

Input documents describe the elements to place with ``<X> <Y> <W> <H>``
mask tokens in the coordinate slots. Output documents list the salient
blocks followed by the nested region structure, one tag per line with a
two-space indent per depth::

    <body>
      <div class="saliency" x="100" y="200" w="300" h="250"></div>
      <div class="region" direction="column" align="start" parallel="false" margin="0" x="..." ...>
        <div class="element" margin="0" x="..." y="..." w="..." h="..." category="logo" id="0"></div>
      </div>
    </body>

Coordinates are per-mille integers in [0, 999]; margins are signed
per-mille integers in [-999, 999].
"""

from __future__ import annotations

import html
import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .geometry import BBox, Layout
from .region_tree import RegionNode
from .saliency import SalientBlock

SCALE = 1000
Q_MAX = 999
MASKS = ("<X>", "<Y>", "<W>", "<H>")
INDENT = "  "

INSTRUCTION = ("Please generate a poster layout on the given canvas in HTML format, "
               "replacing every mask token with a coordinate.")

TASKS = {
    "gen_with_class": "layout generation with given class",
    "gen_with_class_and_size": "layout generation with given class and size",
    "completion": "layout completion",
}

# attribute order of every tag kind; the shared global order is
# class, direction, align, parallel, margin, x, y, w, h, category (then id)
_ATTRS = {
    "saliency": ("class", "x", "y", "w", "h"),
    "region": ("class", "direction", "align", "parallel", "margin", "x", "y", "w", "h"),
    "element": ("class", "margin", "x", "y", "w", "h", "category", "id"),
}


class SequenceParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class SequenceDoc:
    kind: str  # "input" | "output"
    text: str
    task: str | None = None

    def mask_count(self) -> int:
        return sum(self.text.count(m) for m in MASKS)


@dataclass(frozen=True)
class ElementConstraint:
    """What the caller fixes about one element to be placed.

    ``size`` is (w, h) and ``box`` a full box, both as canvas fractions.
    """

    category: str
    text: str | None = None
    size: tuple[float, float] | None = None
    box: BBox | None = None


def quantize(value: float) -> int:
    if not math.isfinite(value) or value < -1e-9 or value > 1 + 1e-9:
        raise ValueError(f"coordinate {value!r} outside [0, 1]")
    return min(max(int(math.floor(value * SCALE + 0.5)), 0), Q_MAX)


def quantize_margin(value: float) -> int:
    if not math.isfinite(value) or abs(value) > 1 + 1e-9:
        raise ValueError(f"margin {value!r} outside [-1, 1]")
    q = int(math.floor(abs(value) * SCALE + 0.5))
    return int(math.copysign(min(q, Q_MAX), value)) if q else 0


def dequantize(q: int) -> float:
    return q / SCALE


def _attr_text(pairs) -> str:
    return "".join(f' {k}="{v}"' for k, v in pairs)


# -- input documents ----------------------------------------------------------

def serialize_input(constraints: Sequence[ElementConstraint], task: str) -> SequenceDoc:
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {sorted(TASKS)}")
    if not constraints:
        raise ValueError("at least one element constraint is required")
    lines = [INSTRUCTION, f"Task: {TASKS[task]}", "<body>"]
    for c in constraints:
        x, y, w, h = MASKS
        if c.box is not None and task == "completion":
            x, y, w, h = (quantize(v) for v in c.box.as_list())
        elif c.size is not None and task == "gen_with_class_and_size":
            w, h = quantize(c.size[0]), quantize(c.size[1])
        pairs = [("class", "element"), ("x", x), ("y", y), ("w", w), ("h", h),
                 ("category", html.escape(c.category))]
        if c.text is not None:
            pairs.append(("text", html.escape(c.text)))
        lines.append(f"{INDENT}<div{_attr_text(pairs)}></div>")
    lines.append("</body>")
    return SequenceDoc("input", "\n".join(lines) + "\n", task)


def constraints_from_layout(layout: Layout, task: str) -> list[ElementConstraint]:
    out = []
    for e in layout.elements:
        if task == "gen_with_class_and_size":
            out.append(ElementConstraint(e.category, e.text, size=(e.bbox.w, e.bbox.h)))
        elif task == "completion":
            out.append(ElementConstraint(e.category, e.text, box=e.bbox))
        else:
            out.append(ElementConstraint(e.category, e.text))
    return out


# -- output documents ---------------------------------------------------------

def _geometry(box: BBox):
    return [("x", quantize(box.x)), ("y", quantize(box.y)),
            ("w", quantize(box.w)), ("h", quantize(box.h))]


def serialize_output(tree: RegionNode, blocks: Sequence[SalientBlock],
                     layout: Layout | None = None,
                     categories: Sequence[str] | None = None) -> SequenceDoc:
    """Serialize blocks then the region tree.

    Leaf categories come from ``layout`` (by element index) or, failing
    that, from ``categories``.
    """
    if layout is not None:
        categories = [e.category for e in layout.elements]
    if categories is None:
        raise ValueError("element categories are required")

    lines = ["<body>"]
    for b in blocks:
        lines.append(f"{INDENT}<div{_attr_text([('class', 'saliency')] + _geometry(b.bbox))}></div>")

    def emit(node: RegionNode, depth: int):
        pad = INDENT * depth
        if node.is_leaf:
            idx = node.element_index
            if idx is None or not 0 <= idx < len(categories):
                raise ValueError(f"leaf element index {idx} has no category")
            pairs = ([("class", "element"), ("margin", quantize_margin(node.margin))]
                     + _geometry(node.bbox)
                     + [("category", html.escape(categories[idx])), ("id", idx)])
            lines.append(f"{pad}<div{_attr_text(pairs)}></div>")
            return
        pairs = ([("class", "region"), ("direction", node.direction),
                  ("align", node.align),
                  ("parallel", "true" if node.is_parallel else "false"),
                  ("margin", quantize_margin(node.margin))]
                 + _geometry(node.bbox))
        lines.append(f"{pad}<div{_attr_text(pairs)}>")
        for child in node.children:
            emit(child, depth + 1)
        lines.append(f"{pad}</div>")

    emit(tree, 1)
    lines.append("</body>")
    return SequenceDoc("output", "\n".join(lines) + "\n")


_OPEN_RE = re.compile(r'<div((?:\s+[a-z]+="[^"]*")*)\s*>(</div>)?$')
_ATTR_RE = re.compile(r'\s+([a-z]+)="([^"]*)"')


def _parse_attrs(blob: str, lineno: int, col: int) -> dict[str, str]:
    attrs: dict[str, str] = {}
    for m in _ATTR_RE.finditer(blob):
        key = m.group(1)
        if key in attrs:
            raise SequenceParseError(f"duplicate attribute {key!r}", lineno, col + m.start(1))
        attrs[key] = html.unescape(m.group(2))
    return attrs


def _coord(attrs, key, lineno, lo=0, hi=Q_MAX) -> int:
    raw = attrs.get(key)
    if raw is None:
        raise SequenceParseError(f"missing attribute {key!r}", lineno)
    if not re.fullmatch(r"-?\d+", raw):
        raise SequenceParseError(f"attribute {key!r} is not an integer: {raw!r}", lineno)
    value = int(raw)
    if not lo <= value <= hi:
        raise SequenceParseError(f"attribute {key!r}={value} outside [{lo}, {hi}]", lineno)
    return value


def _box(attrs, lineno) -> BBox:
    return BBox(*(dequantize(_coord(attrs, k, lineno)) for k in ("x", "y", "w", "h")))


class ParsedOutput(NamedTuple):
    tree: RegionNode
    blocks: list[SalientBlock]  # scores are not serialized
    categories: dict[int, str]  # element id -> category


def parse_output(doc: SequenceDoc | str) -> ParsedOutput:
    """Inverse of :func:`serialize_output`."""
    if isinstance(doc, SequenceDoc):
        if doc.kind != "output":
            raise ValueError("parse_output needs an output document")
        text = doc.text
    else:
        text = doc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    blocks: list[SalientBlock] = []
    categories: dict[int, str] = {}
    # stack of (attrs, children, lineno) for open regions
    stack: list[tuple[dict, list, int]] = []
    root: RegionNode | None = None
    state = "start"

    def attach(node: RegionNode, lineno: int):
        nonlocal root
        if stack:
            stack[-1][1].append(node)
        elif root is None:
            root = node
        else:
            raise SequenceParseError("second root node", lineno)

    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.lstrip(" ")
        indent = len(raw) - len(stripped)
        if state == "start":
            if raw != "<body>":
                raise SequenceParseError("expected <body>", lineno)
            state = "body"
            continue
        if state == "end":
            raise SequenceParseError("content after </body>", lineno)
        if raw == "</body>":
            if stack:
                raise SequenceParseError("</body> with unclosed region", lineno)
            state = "end"
            continue
        # a closing tag sits at its region's depth, everything else one deeper
        expected = INDENT * (len(stack) + (stripped != "</div>"))
        if indent != len(expected):
            raise SequenceParseError(f"indent {indent}, expected {len(expected)}", lineno)
        col = indent + 1
        if stripped == "</div>":
            if not stack:
                raise SequenceParseError("unmatched </div>", lineno, col)
            attrs, children, open_line = stack.pop()
            if not children:
                raise SequenceParseError("region without children", open_line)
            node = RegionNode("region", _box(attrs, open_line), tuple(children),
                              direction=attrs["direction"], align=attrs["align"],
                              is_parallel=attrs["parallel"] == "true",
                              margin=dequantize(_coord(attrs, "margin", open_line, -Q_MAX, Q_MAX)))
            attach(node, lineno)
            continue
        m = _OPEN_RE.match(stripped)
        if m is None:
            raise SequenceParseError(f"unrecognised tag {stripped!r}", lineno, col)
        attrs = _parse_attrs(m.group(1), lineno, col + 4)
        closed = m.group(2) is not None
        kind = attrs.get("class")
        if kind not in _ATTRS:
            raise SequenceParseError(f"unknown tag class {kind!r}", lineno, col)
        if tuple(attrs) != _ATTRS[kind]:
            raise SequenceParseError(
                f"{kind} attributes {tuple(attrs)} differ from {_ATTRS[kind]}", lineno, col)
        if kind == "saliency":
            if not closed or stack or root is not None:
                raise SequenceParseError("saliency tags must be closed and precede the tree", lineno, col)
            blocks.append(SalientBlock(_box(attrs, lineno)))
        elif kind == "element":
            if not closed:
                raise SequenceParseError("element tag must be closed on its line", lineno, col)
            idx = _coord(attrs, "id", lineno, 0, 10**9)
            if idx in categories:
                raise SequenceParseError(f"duplicate element id {idx}", lineno, col)
            categories[idx] = attrs["category"]
            attach(RegionNode("leaf", _box(attrs, lineno), element_index=idx,
                              margin=dequantize(_coord(attrs, "margin", lineno, -Q_MAX, Q_MAX))),
                   lineno)
        else:
            if closed:
                raise SequenceParseError("region tag closed on its own line", lineno, col)
            if attrs["direction"] not in ("row", "column"):
                raise SequenceParseError(f"bad direction {attrs['direction']!r}", lineno, col)
            if attrs["align"] not in ("start", "center", "end"):
                raise SequenceParseError(f"bad align {attrs['align']!r}", lineno, col)
            if attrs["parallel"] not in ("true", "false"):
                raise SequenceParseError(f"bad parallel {attrs['parallel']!r}", lineno, col)
            stack.append((attrs, [], lineno))

    eof = len(lines) + 1
    if state != "end":
        raise SequenceParseError("unexpected end of document", eof)
    if root is None:
        raise SequenceParseError("document has no region tree", eof)
    return ParsedOutput(root, blocks, categories)
