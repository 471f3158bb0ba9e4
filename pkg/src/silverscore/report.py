"""Rendering of analysis reports and per-item rows.

Three formats: ``table`` (aligned, 4 decimals), ``delimited`` (tab-separated,
full precision, for plotting) and ``structured`` (JSON, full precision).
"""

import json

FORMATS = ("table", "delimited", "structured")
UNDEFINED = "undefined"


def fmt_table(v):
    if v is None:
        return "-"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def fmt_delimited(v, missing=UNDEFINED):
    if v is None:
        return missing
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_structured(obj):
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def render_delimited(header, rows, missing=UNDEFINED):
    lines = ["\t".join(header)]
    lines += ["\t".join(fmt_delimited(v, missing) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def render_table(header, rows, title=None):
    cells = [list(header)] + [[fmt_table(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    out = [title] if title else []
    for n, r in enumerate(cells):
        first = r[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        out.append("  ".join([first] + rest).rstrip())
        if n == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"


def render_rows(header, rows, fmt, title=None, missing=UNDEFINED):
    """Render a flat table of per-item rows in any format."""
    if fmt == "structured":
        return render_structured([dict(zip(header, row)) for row in rows])
    if fmt == "delimited":
        return render_delimited(header, rows, missing)
    return render_table(header, rows, title)


# -- analysis reports ---------------------------------------------------------------

_TITLES = {
    "correct-vs-random": "Correct vs. Random",
    "reorder": "Original vs. Reordered",
    "prosody": "Prosody intensity",
    "retrieval": "Retrieval",
}


def _separability_table(rep):
    header = ["metric", "overlap_percent", "roc_auc", "n_items", "dropped"]
    rows = [[r["metric"], r["overlap_percent"], r["roc_auc"], r["n_items"], r["dropped"]]
            for r in rep["rows"]]
    return header, rows


def _prosody_tables(rep):
    cat_header = ["category", "count", "percent"]
    cat_rows = [[c["category"], c["count"], c["percent"]] for c in rep["categories"]]
    header = ["metric", "category", "median", "q1", "q3", "iqr", "whisker_lo", "whisker_hi",
              "n_outliers", "pearson_r", "p_value"]
    rows = []
    for r in rep["rows"]:
        for cat, box in r["box"].items():
            box = box or {}
            rows.append([r["metric"], cat, box.get("median"), box.get("q1"), box.get("q3"),
                         box.get("iqr"), box.get("whisker_lo"), box.get("whisker_hi"),
                         len(box["outliers"]) if box else None, r["pearson_r"], r["p_value"]])
    return (cat_header, cat_rows), (header, rows)


def _retrieval_table(rep):
    return ["k", "recall"], [[r["k"], r["recall"]] for r in rep["rows"]]


def _title(rep):
    cfg = rep["config"]
    bits = [f"n = {rep['n_items']}", f"seed = {cfg['seed']}"]
    if rep["analysis"] in ("correct-vs-random", "reorder"):
        bits.append("min-max normalized" if cfg["normalize"] else "raw scores")
    if "direction" in cfg:
        bits.append(f"direction = {cfg['direction']}")
    return f"{_TITLES[rep['analysis']]}  ({', '.join(bits)})"


def render_report(rep, fmt):
    if fmt == "structured":
        return render_structured(rep)
    kind = rep["analysis"]
    if kind == "prosody":
        (ch, cr), (mh, mr) = _prosody_tables(rep)
        if fmt == "delimited":
            # one flat table: category rows carry counts, metric rows carry box stats
            header = ["metric", "category", "count", "percent"] + mh[2:]
            counts = {row[0]: row[1:] for row in cr}
            rows = [[m[0], m[1]] + list(counts[m[1]]) + m[2:] for m in mr]
            if not rows:
                rows = [["-", c[0], c[1], c[2]] + [None] * (len(mh) - 2) for c in cr]
            return render_delimited(header, rows)
        text = render_table(ch, cr, _title(rep))
        if mr:
            short = ["metric", "category", "median", "q1", "q3", "pearson_r", "p_value"]
            rows = [[m[0], m[1], m[2], m[3], m[4], m[9], m[10]] for m in mr]
            text += "\n" + render_table(short, rows)
        return text
    header, rows = _retrieval_table(rep) if kind == "retrieval" else _separability_table(rep)
    if fmt == "delimited":
        return render_delimited(header, rows)
    return render_table(header, rows, _title(rep))
