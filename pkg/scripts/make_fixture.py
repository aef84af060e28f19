"""Write the 3-page synthetic layout fixture used by the golden pipeline test.

    python scripts/make_fixture.py fixtures/three_page.json
"""
import json
import sys
import textwrap

A4 = (595.0, 842.0)
LINE_H = 14.0
LEADING = 18.0
CHAR_W = 5.6

PAGES = [
    {
        "title": "Volcanic Eruption Mechanisms",
        "blocks": [
            ("full", "Magma rises through the crust when buoyancy overcomes the strength of the "
                     "surrounding rock. Dissolved gases exsolve as pressure drops and drive the "
                     "final ascent toward the vent."),
            ("side", "Explosive eruptions fragment magma into ash and pumice. Effusive eruptions "
                     "release lava flows that advance slowly across the landscape."),
            ("full", "Key ideas: viscosity controls explosivity; volatile content sets the energy "
                     "budget; conduit geometry shapes the eruption column."),
        ],
        "image": (340.0, 250.0, 545.0, 400.0),
    },
    {
        "title": "Monitoring and Forecasting",
        "image": (60.0, 110.0, 535.0, 260.0),
        "columns": [
            "Seismometers record swarms of small earthquakes as magma fractures rock on its "
            "way up. Tiltmeters and satellite radar measure ground deformation.",
            "Gas sensors track sulfur dioxide and carbon dioxide output. Rising flux often "
            "precedes an eruption by days to weeks.",
        ],
        "blocks": [
            ("full", "Forecasts combine these signals into probabilities that guide evacuation "
                     "decisions and aviation warnings."),
        ],
    },
    {
        "title": "Hazards and Resilience",
        "blocks": [
            ("full", "Pyroclastic density currents are the deadliest hazard, moving faster than "
                     "any vehicle. Lahars follow river valleys far from the summit."),
            ("full", "Key ideas: land-use planning; early warning; community drills."),
        ],
        "image": (120.0, 520.0, 475.0, 760.0),
        "caption": "Figure: hazard zones around a stratovolcano",
    },
]


def wrap_lines(text, x0, y0, width):
    chars = max(10, int(width / CHAR_W))
    out = []
    y = y0
    for chunk in textwrap.wrap(text, chars):
        out.append({"bbox": [x0, y, round(x0 + len(chunk) * CHAR_W, 2), y + LINE_H], "text": chunk})
        y += LEADING
    return out, y


def build_page(i, spec):
    w, h = A4
    lines = [{"bbox": [60.0, 50.0, 60.0 + len(spec["title"]) * 11.0, 74.0], "text": spec["title"]}]
    images = []
    y = 100.0
    if i == 1:
        x0, y0, x1, y1 = spec["image"]
        images.append({"bbox": [x0, y0, x1, y1]})
        y = y1 + 24
        col_w = 220.0
        ends = []
        for c, text in enumerate(spec["columns"]):
            ls, end = wrap_lines(text, 60.0 + c * (col_w + 35.0), y, col_w)
            lines += ls
            ends.append(end)
        y = max(ends) + 28
    for kind, text in spec["blocks"]:
        if kind == "side":
            x0, y0, x1, y1 = spec["image"]
            images.append({"bbox": [x0, y0, x1, y1]})
            ls, _ = wrap_lines(text, 60.0, y0 + 10, x0 - 80.0)
            lines += ls
            y = y1 + 28
        else:
            ls, y = wrap_lines(text, 60.0, y, 470.0)
            lines += ls
            y += 28
    if i == 2:
        x0, y0, x1, y1 = spec["image"]
        images.append({"bbox": [x0, y0, x1, y1]})
        cap = spec["caption"]
        # white caption printed over the bottom of the image
        lines.append({"bbox": [x0 + 12, y1 - 30, x0 + 12 + len(cap) * CHAR_W, y1 - 30 + LINE_H],
                      "text": cap, "color": "#ffffff"})
    lines.append({"bbox": [w / 2 - 6, h - 40, w / 2 + 6, h - 28], "text": str(i + 1)})
    return {"index": i, "width": w, "height": h, "lines": lines, "images": images}


def main(path):
    doc = {"pages": [build_page(i, p) for i, p in enumerate(PAGES)]}
    # one line object per row keeps validation messages' line numbers meaningful
    rows = ['{"pages": [']
    for pi, page in enumerate(doc["pages"]):
        head = {k: page[k] for k in ("index", "width", "height")}
        rows.append("  {" + json.dumps(head)[1:-1] + ',')
        rows.append('   "lines": [')
        rows.append(",\n".join("    " + json.dumps(ln) for ln in page["lines"]))
        rows.append("   ],")
        rows.append('   "images": [' + ", ".join(json.dumps(im) for im in page["images"]) + "]")
        rows.append("  }" + ("," if pi < len(doc["pages"]) - 1 else ""))
    rows.append("]}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixtures/three_page.json")
