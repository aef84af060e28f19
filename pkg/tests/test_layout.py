import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from docback.layout import (BBox, ExtractionParams, ImageZone, LayoutValidationError, PageLayout,
                            Region, TextLine, extract, group_paragraphs, layout_to_json,
                            load_layout, merge_columns, overlap_x, parse_layout,
                            partition_by_images, suppress)

import oracles

PARAMS = ExtractionParams(eta_x=0.5, max_vgap=8.0, left_margin_tol=4.0, tau_cont=0.9, tau_iou=0.5)


def line(x0, y0, x1, y1, text="t"):
    return TextLine(BBox(x0, y0, x1, y1), text)


def region(x0, y0, x1, y1, text="r", ids=(0,)):
    return Region(BBox(x0, y0, x1, y1), text, tuple(ids))


@st.composite
def boxes(draw, lo=0.0, hi=600.0):
    x0 = draw(st.floats(lo, hi - 1))
    y0 = draw(st.floats(lo, hi - 1))
    w = draw(st.floats(0.5, 300))
    h = draw(st.floats(0.5, 300))
    return BBox(x0, y0, x0 + w, y0 + h)


# --- BBox / overlap_x ---------------------------------------------------------

def test_bbox_rejects_degenerate():
    with pytest.raises(ValueError):
        BBox(0, 0, 0, 5)
    with pytest.raises(ValueError):
        BBox(0, 0, float("inf"), 5)


@pytest.mark.parametrize("a, b, expected", [
    ((0, 0, 10, 5), (20, 0, 30, 5), 0.0),
    ((0, 0, 10, 5), (0, 10, 10, 15), 1.0),
    ((0, 0, 10, 5), (5, 0, 25, 5), 0.5),
])
def test_overlap_x_examples(a, b, expected):
    assert overlap_x(BBox(*a), BBox(*b)) == pytest.approx(expected, abs=1e-12)


def test_overlap_x_unit_floor_in_denominator():
    # widths below 1pt fall back to a denominator of 1
    assert overlap_x(BBox(0, 0, 0.5, 1), BBox(0, 0, 10, 1)) == pytest.approx(0.5)


@given(boxes(), boxes())
def test_overlap_x_symmetric_bounded(a, b):
    v = overlap_x(a, b)
    assert v == overlap_x(b, a)
    assert 0.0 <= v <= 1.0


# --- paragraphs ---------------------------------------------------------------

def test_group_two_close_lines():
    out = group_paragraphs([line(50, 100, 300, 112), line(50, 116, 280, 128)], PARAMS)
    assert len(out) == 1
    assert out[0].bbox == BBox(50, 100, 300, 128)


def test_group_two_far_lines():
    out = group_paragraphs([line(50, 100, 300, 112), line(50, 162, 280, 174)], PARAMS)
    assert len(out) == 2


def test_group_single_line():
    ln = line(10, 10, 90, 20)
    out = group_paragraphs([ln], PARAMS)
    assert len(out) == 1 and out[0].bbox == ln.bbox and out[0].member_line_ids == (0,)


def test_group_margin_break():
    out = group_paragraphs([line(50, 100, 300, 112), line(70, 114, 280, 126)], PARAMS)
    assert len(out) == 2


def test_group_empty():
    assert group_paragraphs([], PARAMS) == []


def test_group_default_vgap_from_median_height():
    params = ExtractionParams()
    lines = [line(50, 0, 300, 10), line(50, 24, 300, 34), line(50, 80, 300, 90)]
    # median height 10 -> max gap 15: first two join, third stays apart
    out = group_paragraphs(lines, params)
    assert sorted(len(r.member_line_ids) for r in out) == [1, 2]


def test_group_matches_component_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        page = oracles.random_page(rng, with_images=False)
        raw = [ln.bbox.as_list() for ln in page.lines]
        got = {frozenset(r.member_line_ids) for r in group_paragraphs(page.lines, PARAMS)}
        want = set(oracles.paragraph_groups(raw, PARAMS.left_margin_tol, PARAMS.max_vgap))
        assert got == want


# --- partition ----------------------------------------------------------------

def test_partition_no_images():
    ps = [region(0, 0, 10, 10), region(0, 500, 10, 510)]
    groups = partition_by_images(ps, [])
    assert groups["top"] == ps and groups["side"] == [] and groups["bottom"] == []


def test_partition_top_side_bottom():
    img = [ImageZone(BBox(300, 300, 500, 500))]
    top, side, bottom = region(0, 90, 200, 110), region(0, 390, 200, 410), region(0, 690, 200, 710)
    groups = partition_by_images([top, side, bottom], img)
    assert groups == {"top": [top], "side": [side], "bottom": [bottom]}


# --- merge --------------------------------------------------------------------

def test_merge_stacked():
    out = merge_columns([region(50, 100, 300, 150, "a", (0,)), region(50, 155, 300, 200, "b", (1,))],
                        PARAMS)
    assert len(out) == 1
    assert out[0].bbox == BBox(50, 100, 300, 200)
    assert out[0].text == "a b"
    assert out[0].member_line_ids == (0, 1)


def test_merge_side_by_side_columns_stay_apart():
    out = merge_columns([region(40, 100, 270, 200, ids=(0,)), region(310, 100, 555, 200, ids=(1,))],
                        PARAMS)
    assert len(out) == 2


def test_merge_is_transitive():
    a = region(0, 0, 100, 10, "a", (0,))
    b = region(40, 15, 160, 25, "b", (1,))
    c = region(100, 30, 200, 40, "c", (2,))
    assert overlap_x(a.bbox, c.bbox) == 0.0
    out = merge_columns([c, a, b], PARAMS)
    assert len(out) == 1
    assert out[0].text == "a b c"


@settings(max_examples=60, deadline=None)
@given(st.lists(boxes(), min_size=0, max_size=8), st.randoms(use_true_random=False))
def test_merge_permutation_invariant(bs, rnd):
    regions = [Region(b, f"r{i}", (i,)) for i, b in enumerate(bs)]
    shuffled = list(regions)
    rnd.shuffle(shuffled)
    assert merge_columns(regions, PARAMS) == merge_columns(shuffled, PARAMS)


def test_merge_matches_component_oracle():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 9))
        raw = []
        for _ in range(n):
            x0, y0 = rng.uniform(0, 400, 2)
            raw.append((x0, y0, x0 + rng.uniform(5, 200), y0 + rng.uniform(5, 60)))
        regions = [Region(BBox(*b), f"r{i}", (i,)) for i, b in enumerate(raw)]
        got = {frozenset(r.member_line_ids) for r in merge_columns(regions, PARAMS)}
        want = set(oracles.column_groups(raw, PARAMS.eta_x, PARAMS.max_vgap))
        assert got == want
        for r in merge_columns(regions, PARAMS):
            assert r.bbox.as_list() == list(oracles.union_box([raw[i] for i in r.member_line_ids]))


# --- suppress -----------------------------------------------------------------

def test_suppress_contained():
    q = region(0, 0, 100, 100, ids=(0,))
    p = region(10, 10, 50, 50, ids=(1,))
    assert suppress([p, q], PARAMS) == [q]


def test_suppress_disjoint_kept():
    a, b = region(0, 0, 10, 10, ids=(0,)), region(20, 20, 30, 30, ids=(1,))
    assert len(suppress([a, b], PARAMS)) == 2


def test_suppress_iou():
    # q = 10x10, p = 8x10 shifted: inter 6x10=60, union 100+80-60=120 -> IoU 0.5;
    # containment 60/80 = 0.75 < tau_cont
    q = region(0, 0, 10, 10, ids=(0,))
    p = region(4, 0, 12, 10, ids=(1,))
    assert q.bbox.iou(p.bbox) == pytest.approx(0.5)
    assert suppress([p, q], PARAMS) == [q]
    # 9x10 box shifted by 2.875: inter 71.25, union 118.75 -> IoU 0.6, containment 0.79
    q2 = region(0, 0, 10, 10, ids=(0,))
    p2 = region(2.875, 0, 11.875, 10, ids=(1,))
    assert p2.bbox.iou(q2.bbox) == pytest.approx(0.6)
    assert p2.bbox.containment(q2.bbox) < PARAMS.tau_cont
    assert suppress([p2, q2], PARAMS) == [q2]


def _check_suppress(regions, params):
    out = suppress(regions, params)
    kept = [r.bbox.as_list() for r in out]
    for p, q in itertools.combinations(kept, 2):
        assert not oracles.violates(p, q, params.tau_cont, params.tau_iou)
    kept_ids = {r.member_line_ids for r in out}
    for r in regions:
        if r.member_line_ids in kept_ids:
            continue
        p = r.bbox.as_list()
        assert any(oracles.area(q) >= oracles.area(p)
                   and oracles.violates(p, q, params.tau_cont, params.tau_iou) for q in kept)
    assert suppress(out, params) == out


@settings(max_examples=80, deadline=None)
@given(st.lists(boxes(hi=200), min_size=0, max_size=10))
def test_suppress_pairwise_and_idempotent(bs):
    _check_suppress([Region(b, "r", (i,)) for i, b in enumerate(bs)], PARAMS)


# --- extract ------------------------------------------------------------------

def test_extract_text_concatenation():
    page = PageLayout(0, 200, 200, (line(10, 40, 60, 50, "Beta"), line(10, 10, 60, 20, "Alpha")))
    ex = extract(page, PARAMS)
    assert ex.page_text == "Alpha Beta"


def test_extract_one_paragraph():
    lines = (line(50, 100, 300, 112, "one"), line(50, 116, 290, 128, "two"),
             line(50, 132, 250, 144, "three"))
    ex = extract(PageLayout(0, 595, 842, lines), PARAMS)
    assert len(ex.representative_boxes) == 1
    assert ex.representative_boxes[0] == BBox(50, 100, 300, 144)
    assert len(ex.text_boxes) == 3


def test_extract_empty_page():
    ex = extract(PageLayout(0, 100, 100), PARAMS)
    assert (ex.text_boxes, ex.representative_boxes, ex.page_text) == ([], [], "")


def test_extract_clamps_and_image_toggle():
    page = PageLayout(0, 100, 100, (line(-10, 10, 50, 20, "a"), line(80, 90, 150, 120, "b")),
                      (ImageZone(BBox(60, 30, 200, 60)),))
    ex = extract(page, PARAMS)
    for b in ex.text_boxes + ex.representative_boxes:
        assert 0 <= b.x0 < b.x1 <= 100 and 0 <= b.y0 < b.y1 <= 100
    assert BBox(60, 30, 100, 60) in ex.representative_boxes
    no_img = extract(page, ExtractionParams(max_vgap=8, include_images=False))
    assert BBox(60, 30, 100, 60) not in no_img.representative_boxes


def test_extract_region_bbox_is_member_union():
    rng = np.random.default_rng(2)
    for _ in range(50):
        page = oracles.random_page(rng)
        ex = extract(page, ExtractionParams())
        for r in ex.regions:
            members = [page.lines[i].bbox.as_list() for i in r.member_line_ids]
            assert r.bbox.as_list() == list(oracles.union_box(members))


# --- interchange file ---------------------------------------------------------

def test_load_fixture(fixture_layout):
    pages = load_layout(fixture_layout)
    assert [p.page_index for p in pages] == [0, 1, 2]
    assert all(p.images for p in pages)


def test_layout_round_trip(fixture_layout):
    pages = load_layout(fixture_layout)
    assert parse_layout(json.dumps(layout_to_json(pages))) == pages


def test_malformed_bbox_names_line():
    text = ('{"pages": [\n {"index": 0, "width": 100, "height": 100, "lines": [\n'
            '  {"bbox": [0, 0, 10, 5], "text": "ok"},\n'
            '  {"bbox": [0, 0, 10], "text": "bad"}\n ]}\n]}')
    with pytest.raises(LayoutValidationError, match=r"pages\[0\]\.lines\[1\]\.bbox.*line 4"):
        parse_layout(text)


@pytest.mark.parametrize("doc, match", [
    ('{"pages": []}', "no pages"),
    ('{"pages": [{"index": 0, "width": 10, "height": 10}]}', "missing field"),
    ('{"pages": [{"index": -1, "width": 10, "height": 10, "lines": []}]}', "non-negative"),
    ('{"pages": [{"index": 0, "width": 10, "height": 10, "lines": [], "extra": 1}]}', "unknown"),
    ('{"pages": [{"index": 0, "width": 10, "height": 10, "lines": [{"bbox": [0,0,1,1], "text": " "}]}]}',
     "empty text"),
    ('{"pages": [{"index": 0, "width": 10, "height": 10, "lines": [], "images": [{"bbox": [5,5,1,1]}]}]}',
     "degenerate"),
    ('{"pages": [', "invalid JSON"),
])
def test_validation_errors(doc, match):
    with pytest.raises(LayoutValidationError, match=match):
        parse_layout(doc)


def test_empty_file(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    with pytest.raises(LayoutValidationError, match="no pages"):
        load_layout(p)
