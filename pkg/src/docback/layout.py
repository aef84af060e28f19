"""Foreground region extraction from page layouts.

Lines are grouped into paragraphs (consistent left margin, bounded vertical
gap), paragraphs are merged into column-like regions within image-delimited
vertical groups, and redundant regions are removed by containment/IoU
suppression. Coordinates are points with a top-left origin.
"""
from __future__ import annotations

import json
import logging
import math
import statistics
from dataclasses import dataclass, field, replace
from json import JSONDecoder, scanner
from json.decoder import JSONObject
from pathlib import Path
from typing import Iterable, Sequence

from .color import BLACK, Srgb

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class BBox:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        for v in (self.x0, self.y0, self.x1, self.y1):
            if not math.isfinite(v):
                raise ValueError(f"non-finite bbox coordinate in {self}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"degenerate bbox {self.as_list()}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center_y(self) -> float:
        return 0.5 * (self.y0 + self.y1)

    def union(self, other: "BBox") -> "BBox":
        return BBox(min(self.x0, other.x0), min(self.y0, other.y0),
                    max(self.x1, other.x1), max(self.y1, other.y1))

    def intersection_area(self, other: "BBox") -> float:
        w = min(self.x1, other.x1) - max(self.x0, other.x0)
        h = min(self.y1, other.y1) - max(self.y0, other.y0)
        return w * h if w > 0 and h > 0 else 0.0

    def iou(self, other: "BBox") -> float:
        inter = self.intersection_area(other)
        return inter / (self.area + other.area - inter)

    def containment(self, other: "BBox") -> float:
        """Intersection over the smaller of the two areas."""
        return self.intersection_area(other) / min(self.area, other.area)

    def expand(self, pad: float) -> "BBox":
        return BBox(self.x0 - pad, self.y0 - pad, self.x1 + pad, self.y1 + pad)

    def scale(self, sx: float, sy: float | None = None) -> "BBox":
        sy = sx if sy is None else sy
        return BBox(self.x0 * sx, self.y0 * sy, self.x1 * sx, self.y1 * sy)

    def clamp(self, width: float, height: float) -> "BBox | None":
        """Clip to [0,width]x[0,height]; None if nothing with positive area remains."""
        x0, y0 = max(0.0, self.x0), max(0.0, self.y0)
        x1, y1 = min(float(width), self.x1), min(float(height), self.y1)
        if x1 <= x0 or y1 <= y0:
            return None
        return BBox(x0, y0, x1, y1)

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


def union_all(boxes: Iterable[BBox]) -> BBox:
    it = iter(boxes)
    out = next(it)
    for b in it:
        out = out.union(b)
    return out


def vertical_gap(a: BBox, b: BBox) -> float:
    """Empty space between two boxes along y; 0 when their y-extents overlap."""
    return max(0.0, max(a.y0, b.y0) - min(a.y1, b.y1))


@dataclass(frozen=True)
class TextLine:
    bbox: BBox
    text: str
    decorative: bool = False
    color: Srgb = BLACK

    def __post_init__(self):
        if not self.text.strip() and not self.decorative:
            raise ValueError("empty text line must be flagged decorative")


@dataclass(frozen=True)
class ImageZone:
    bbox: BBox


@dataclass(frozen=True)
class PageLayout:
    page_index: int
    width: float
    height: float
    lines: tuple[TextLine, ...] = ()
    images: tuple[ImageZone, ...] = ()

    def __post_init__(self):
        if self.page_index < 0:
            raise ValueError("page_index must be >= 0")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("page width and height must be positive")

    def clamped(self) -> "PageLayout":
        """Copy with every box clipped to the page; boxes left empty are dropped."""
        lines = []
        for ln in self.lines:
            b = ln.bbox.clamp(self.width, self.height)
            if b is None:
                log.warning("page %d: dropping off-page line %r", self.page_index, ln.text)
                continue
            lines.append(replace(ln, bbox=b))
        images = []
        for im in self.images:
            b = im.bbox.clamp(self.width, self.height)
            if b is not None:
                images.append(ImageZone(b))
        return replace(self, lines=tuple(lines), images=tuple(images))


@dataclass(frozen=True)
class Region:
    bbox: BBox
    text: str
    member_line_ids: tuple[int, ...]

    def __post_init__(self):
        if not self.member_line_ids:
            raise ValueError("region needs at least one member line")


@dataclass(frozen=True)
class ExtractionParams:
    eta_x: float = 0.5
    # None -> 1.5x the page's median line height
    max_vgap: float | None = None
    left_margin_tol: float = 4.0
    tau_cont: float = 0.9
    tau_iou: float = 0.5
    include_images: bool = True

    def __post_init__(self):
        for name in ("eta_x", "tau_cont", "tau_iou"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.max_vgap is not None and self.max_vgap < 0:
            raise ValueError("max_vgap must be >= 0")
        if self.left_margin_tol < 0:
            raise ValueError("left_margin_tol must be >= 0")

    def resolved(self, lines: Sequence[TextLine]) -> "ExtractionParams":
        if self.max_vgap is not None:
            return self
        heights = [ln.bbox.height for ln in lines]
        gap = 1.5 * statistics.median(heights) if heights else 0.0
        return replace(self, max_vgap=gap)


def overlap_x(a: BBox, b: BBox) -> float:
    inter = max(0.0, min(a.x1, b.x1) - max(a.x0, b.x0))
    return inter / max(1.0, min(a.width, b.width))


def reading_key(b: BBox):
    return (b.y0, b.x0, b.y1, b.x1)


class _DisjointSet:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return list(out.values())


def _merge_members(members: list[Region]) -> Region:
    members = sorted(members, key=lambda r: reading_key(r.bbox))
    text = " ".join(r.text for r in members if r.text)
    ids = tuple(sorted({i for r in members for i in r.member_line_ids}))
    return Region(union_all(r.bbox for r in members), text, ids)


def _max_vgap(params: ExtractionParams) -> float:
    if params.max_vgap is None:
        raise ValueError("max_vgap unresolved; call params.resolved(lines) first")
    return params.max_vgap


def group_paragraphs(lines: Sequence[TextLine], params: ExtractionParams,
                     line_ids: Sequence[int] | None = None) -> list[Region]:
    """Group lines sharing a left margin (within tolerance) and separated by at
    most ``max_vgap`` into paragraphs. Grouping is transitive."""
    if not lines:
        return []
    params = params.resolved(lines)
    max_gap = _max_vgap(params)
    ids = list(range(len(lines))) if line_ids is None else list(line_ids)
    order = sorted(range(len(lines)), key=lambda i: reading_key(lines[i].bbox))
    ds = _DisjointSet(len(lines))
    # sorted by y0, so y0[j] - y1[i] lower-bounds the gap and lets the scan stop early
    for a, i in enumerate(order):
        bi = lines[i].bbox
        for j in order[a + 1:]:
            bj = lines[j].bbox
            if bj.y0 - bi.y1 > max_gap:
                break
            if abs(bi.x0 - bj.x0) <= params.left_margin_tol and vertical_gap(bi, bj) <= max_gap:
                ds.union(i, j)
    regions = []
    for members in ds.groups():
        members.sort(key=lambda i: reading_key(lines[i].bbox))
        text = " ".join(lines[i].text for i in members if lines[i].text)
        regions.append(Region(union_all(lines[i].bbox for i in members), text,
                              tuple(sorted(ids[i] for i in members))))
    regions.sort(key=lambda r: reading_key(r.bbox))
    return regions


def partition_by_images(paragraphs: Sequence[Region], images: Sequence[ImageZone],
                        page: PageLayout | None = None) -> dict[str, list[Region]]:
    """Split paragraphs into top/side/bottom groups around image zones.

    A paragraph is "side" when its vertical center lies inside some image's
    y-extent, "top" when it lies above every image, otherwise "bottom". With
    no images everything lands in "top".
    """
    groups: dict[str, list[Region]] = {"top": [], "side": [], "bottom": []}
    if not images:
        groups["top"] = list(paragraphs)
        return groups
    first_top = min(im.bbox.y0 for im in images)
    for p in paragraphs:
        cy = p.bbox.center_y
        if any(im.bbox.y0 <= cy <= im.bbox.y1 for im in images):
            groups["side"].append(p)
        elif cy < first_top:
            groups["top"].append(p)
        else:
            groups["bottom"].append(p)
    return groups


def merge_columns(group: Sequence[Region], params: ExtractionParams) -> list[Region]:
    """Transitively merge regions with overlap_x >= eta_x and vertical gap <= max_vgap."""
    if not group:
        return []
    max_gap = _max_vgap(params)
    regions = sorted(group, key=lambda r: (reading_key(r.bbox), r.member_line_ids))
    ds = _DisjointSet(len(regions))
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            a, b = regions[i].bbox, regions[j].bbox
            if overlap_x(a, b) >= params.eta_x and vertical_gap(a, b) <= max_gap:
                ds.union(i, j)
    merged = [_merge_members([regions[i] for i in g]) for g in ds.groups()]
    merged.sort(key=lambda r: (reading_key(r.bbox), r.member_line_ids))
    return merged


def suppress(regions: Sequence[Region], params: ExtractionParams) -> list[Region]:
    """Drop regions largely contained in, or heavily overlapping, a larger kept region.

    Candidates are visited by descending area (ties in reading order), keep-first.
    """
    ranked = sorted(regions, key=lambda r: (-r.bbox.area, reading_key(r.bbox), r.member_line_ids))
    kept: list[Region] = []
    for p in ranked:
        if any(p.bbox.containment(q.bbox) >= params.tau_cont or p.bbox.iou(q.bbox) >= params.tau_iou
               for q in kept):
            continue
        kept.append(p)
    kept.sort(key=lambda r: (reading_key(r.bbox), r.member_line_ids))
    return kept


@dataclass
class Extraction:
    page_index: int
    text_boxes: list[BBox]
    representative_boxes: list[BBox]
    page_text: str
    regions: list[Region] = field(default_factory=list)
    text_colors: list[Srgb] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "page_index": self.page_index,
            "page_text": self.page_text,
            "text_boxes": [b.as_list() for b in self.text_boxes],
            "text_colors": [c.to_hex() for c in self.text_colors],
            "representative_boxes": [b.as_list() for b in self.representative_boxes],
            "regions": [{"bbox": r.bbox.as_list(), "text": r.text,
                         "member_line_ids": list(r.member_line_ids)} for r in self.regions],
        }


def extract(page: PageLayout, params: ExtractionParams | None = None) -> Extraction:
    """Run the full region-extraction chain on one page."""
    params = params or ExtractionParams()
    page = page.clamped()
    if not page.lines:
        return Extraction(page.page_index, [], [], "")
    order = sorted(range(len(page.lines)), key=lambda i: reading_key(page.lines[i].bbox))
    lines = [page.lines[i] for i in order]
    page_text = " ".join(ln.text for ln in lines if ln.text)
    params = params.resolved(lines)

    # decorative lines still get ARO backings but do not shape regions
    content = [(i, page.lines[i]) for i in order if not page.lines[i].decorative]
    paragraphs = group_paragraphs([ln for _, ln in content], params, [i for i, _ in content])
    groups = partition_by_images(paragraphs, page.images, page)
    merged: list[Region] = []
    for key in ("top", "side", "bottom"):
        merged.extend(merge_columns(groups[key], params))
    survivors = suppress(merged, params)

    rep = [r.bbox for r in survivors]
    if params.include_images:
        rep.extend(im.bbox for im in page.images)
    return Extraction(page.page_index, [ln.bbox for ln in lines], rep, page_text,
                      survivors, [ln.color for ln in lines])


# --- layout interchange file -------------------------------------------------

class LayoutValidationError(ValueError):
    pass


class _LineDict(dict):
    line = 0


def _decoder() -> JSONDecoder:
    dec = JSONDecoder()

    def parse_object(s_and_end, *args, **kw):
        s, end = s_and_end
        obj, new_end = JSONObject(s_and_end, *args, **kw)
        d = _LineDict(obj)
        d.line = s.count("\n", 0, end) + 1
        return d, new_end

    dec.parse_object = parse_object
    # the C scanner ignores parse_object overrides
    dec.scan_once = scanner.py_make_scanner(dec)
    return dec


def _fail(path: str, obj, msg: str):
    line = getattr(obj, "line", 0)
    where = f" (line {line})" if line else ""
    raise LayoutValidationError(f"{path}: {msg}{where}")


def _number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _parse_bbox(obj, path: str) -> BBox:
    raw = obj.get("bbox")
    if not isinstance(raw, list) or len(raw) != 4 or not all(_number(v) for v in raw):
        _fail(f"{path}.bbox", obj, "expected [x0, y0, x1, y1] of finite numbers")
    x0, y0, x1, y1 = (float(v) for v in raw)
    if not (x1 > x0 and y1 > y0):
        _fail(f"{path}.bbox", obj, f"degenerate box {raw}")
    return BBox(x0, y0, x1, y1)


def _check_keys(obj, path: str, allowed: set[str], required: set[str]):
    if not isinstance(obj, dict):
        _fail(path, obj, "expected an object")
    extra = set(obj) - allowed
    if extra:
        _fail(path, obj, f"unknown field(s) {sorted(extra)}")
    missing = required - set(obj)
    if missing:
        _fail(path, obj, f"missing field(s) {sorted(missing)}")


def parse_layout(text: str) -> list[PageLayout]:
    """Parse and strictly validate a layout interchange document."""
    try:
        doc = _decoder().decode(text)
    except json.JSONDecodeError as e:
        raise LayoutValidationError(f"invalid JSON: {e.msg} (line {e.lineno})") from None
    _check_keys(doc, "$", {"pages"}, {"pages"})
    pages_raw = doc["pages"]
    if not isinstance(pages_raw, list):
        _fail("$.pages", doc, "expected a list")
    if not pages_raw:
        _fail("$.pages", doc, "no pages")
    pages = []
    for pi, p in enumerate(pages_raw):
        path = f"$.pages[{pi}]"
        _check_keys(p, path, {"index", "width", "height", "lines", "images"},
                    {"index", "width", "height", "lines"})
        idx = p["index"]
        if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
            _fail(f"{path}.index", p, "expected a non-negative integer")
        for k in ("width", "height"):
            if not _number(p[k]) or p[k] <= 0:
                _fail(f"{path}.{k}", p, "expected a positive number")
        if not isinstance(p["lines"], list):
            _fail(f"{path}.lines", p, "expected a list")
        lines = []
        for li, ln in enumerate(p["lines"]):
            lpath = f"{path}.lines[{li}]"
            _check_keys(ln, lpath, {"bbox", "text", "decorative", "color"}, {"bbox", "text"})
            if not isinstance(ln["text"], str):
                _fail(f"{lpath}.text", ln, "expected a string")
            deco = ln.get("decorative", False)
            if not isinstance(deco, bool):
                _fail(f"{lpath}.decorative", ln, "expected a boolean")
            if not ln["text"].strip() and not deco:
                _fail(f"{lpath}.text", ln, "empty text on a non-decorative line")
            color = BLACK
            if "color" in ln:
                try:
                    color = Srgb.from_hex(ln["color"])
                except (ValueError, AttributeError, TypeError):
                    _fail(f"{lpath}.color", ln, "expected a #rrggbb string")
            lines.append(TextLine(_parse_bbox(ln, lpath), ln["text"], deco, color))
        images = []
        imgs_raw = p.get("images", [])
        if not isinstance(imgs_raw, list):
            _fail(f"{path}.images", p, "expected a list")
        for ii, im in enumerate(imgs_raw):
            ipath = f"{path}.images[{ii}]"
            _check_keys(im, ipath, {"bbox"}, {"bbox"})
            images.append(ImageZone(_parse_bbox(im, ipath)))
        pages.append(PageLayout(idx, float(p["width"]), float(p["height"]),
                                tuple(lines), tuple(images)))
    seen = [p.page_index for p in pages]
    if len(set(seen)) != len(seen):
        raise LayoutValidationError("$.pages: duplicate page index")
    return sorted(pages, key=lambda p: p.page_index)


def load_layout(path: str | Path) -> list[PageLayout]:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise LayoutValidationError(f"{path}: no pages (empty file)")
    return parse_layout(text)


def layout_to_json(pages: Sequence[PageLayout]) -> dict:
    out = []
    for p in pages:
        lines = []
        for ln in p.lines:
            d = {"bbox": ln.bbox.as_list(), "text": ln.text}
            if ln.decorative:
                d["decorative"] = True
            if ln.color != BLACK:
                d["color"] = ln.color.to_hex()
            lines.append(d)
        out.append({"index": p.page_index, "width": p.width, "height": p.height,
                    "lines": lines, "images": [{"bbox": im.bbox.as_list()} for im in p.images]})
    return {"pages": out}
