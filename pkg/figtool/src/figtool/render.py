"""Render the four reference plots from the simulator's sweep CSVs.

Each figure id reads one CSV (comma separated, optional leading '#' unit
comment) and writes a PNG plus a sidecar caption text file.  Rendering is
a pure function of the CSV contents: fixed styling, fixed canvas, no
timestamps, so re-rendering the same file is byte-identical under a fixed
toolchain.

    figtool --fig fig4 --in results/fig4.csv --out plots/fig4.png

Axes follow the house conventions: transmit power in dBW on x, SINR in
dB, BER on a log scale floored at 1e-5 (clipped points are annotated),
throughput in 1e6 packets/s.
"""

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

BER_FLOOR = 1e-5

_SINR_COLUMNS = ["px_dbw", "mode", "sinr_emp_db", "sinr_analytic_db"]
_CAMPAIGN_COLUMNS = ["px_dbw", "scheme", "ber1", "ber2", "r_total"]

REQUIRED_COLUMNS = {
    "fig3": _SINR_COLUMNS,
    "fig4": _CAMPAIGN_COLUMNS,
    "fig5": _CAMPAIGN_COLUMNS,
    "fig6": _CAMPAIGN_COLUMNS,
}

_CAPTIONS = {
    "fig3": "Decoder SINR versus transmit power: empirical markers against "
            "the closed-form dashed curves, per RIS operating mode.",
    "fig4": "Bit error rate versus transmit power for the differential and "
            "coherent receivers, both stages.",
    "fig5": "Total packet throughput versus transmit power per scheme.",
    "fig6": "Total packet throughput versus transmit power for panel size "
            "and training-split variants.",
}

_STYLE_CYCLE = [
    dict(color="#1f77b4", marker="o"),
    dict(color="#d62728", marker="s"),
    dict(color="#2ca02c", marker="^"),
    dict(color="#9467bd", marker="v"),
    dict(color="#ff7f0e", marker="D"),
    dict(color="#8c564b", marker="x"),
    dict(color="#17becf", marker="+"),
    dict(color="#7f7f7f", marker="*"),
]


class SchemaError(ValueError):
    pass


@dataclass
class FigureSpec:
    fig_id: str
    csv_path: str
    out_path: str
    styles: dict = field(default_factory=dict)   # series key -> style kwargs

    def __post_init__(self):
        if self.fig_id not in REQUIRED_COLUMNS:
            raise SchemaError(f"unknown figure id {self.fig_id!r}")


def load_rows(path: str) -> list[dict]:
    with open(path, newline="") as f:
        lines = [ln for ln in f if ln.strip() and not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def check_columns(rows: list[dict], fig_id: str, path: str) -> None:
    missing = [c for c in REQUIRED_COLUMNS[fig_id] if c not in rows[0]]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)} "
                          f"required by {fig_id}")


def _series(rows, key_col, x_col, y_col):
    out = {}
    for row in rows:
        key = row[key_col]
        out.setdefault(key, []).append((float(row[x_col]), float(row[y_col])))
    return {k: np.array(sorted(v)) for k, v in out.items()}


def _new_axes(title):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    ax.set_title(title)
    ax.set_xlabel("transmit power [dBW]")
    ax.grid(True, alpha=0.3, linestyle="--")
    return fig, ax


def _style(spec: FigureSpec, key: str, i: int) -> dict:
    return dict(spec.styles.get(key, _STYLE_CYCLE[i % len(_STYLE_CYCLE)]))


def _render_fig3(spec: FigureSpec, rows) -> str:
    fig, ax = _new_axes("SINR verification")
    ax.set_ylabel("SINR [dB]")
    emp = _series(rows, "mode", "px_dbw", "sinr_emp_db")
    ana = _series(rows, "mode", "px_dbw", "sinr_analytic_db")
    for i, (mode, pts) in enumerate(sorted(emp.items())):
        st = _style(spec, mode, i)
        ax.plot(pts[:, 0], pts[:, 1], linestyle="none", label=f"{mode} (sim)",
                **st)
        a = ana[mode]
        ax.plot(a[:, 0], a[:, 1], linestyle="--", color="black", linewidth=1.0,
                label=f"{mode} (closed form)")
    ax.legend(fontsize=8)
    return ""


def _render_fig4(spec: FigureSpec, rows) -> str:
    fig, ax = _new_axes("BER comparison")
    ax.set_ylabel("bit error rate")
    ax.set_yscale("log")
    ax.set_ylim(BER_FLOOR, 1.0)
    clipped = 0
    i = 0
    for stage, col in (("stage 1", "ber1"), ("stage 2", "ber2")):
        for scheme, pts in sorted(_series(rows, "scheme", "px_dbw",
                                          col).items()):
            y = pts[:, 1]
            if np.isnan(y).all():
                continue
            clipped += int(np.count_nonzero(y < BER_FLOOR))
            st = _style(spec, scheme, i)
            ax.plot(pts[:, 0], np.maximum(y, BER_FLOOR),
                    linestyle="-" if stage == "stage 1" else ":",
                    label=f"{scheme} {stage}", **st)
            i += 1
    note = ""
    if clipped:
        note = f"{clipped} zero-BER point(s) clipped at {BER_FLOOR:g}"
        ax.annotate(note, xy=(0.02, 0.03), xycoords="axes fraction",
                    fontsize=7, color="#555555")
    ax.legend(fontsize=7, ncol=2)
    return note


def _render_throughput(spec: FigureSpec, rows, title) -> str:
    fig, ax = _new_axes(title)
    ax.set_ylabel("throughput [1e6 packets/s]")
    for i, (scheme, pts) in enumerate(sorted(_series(rows, "scheme", "px_dbw",
                                                     "r_total").items())):
        ax.plot(pts[:, 0], pts[:, 1] / 1e6, label=scheme,
                **_style(spec, scheme, i))
    ax.legend(fontsize=8)
    return ""


def render(spec: FigureSpec) -> Path:
    """Produce the image and its sidecar caption; returns the image path."""
    rows = load_rows(spec.csv_path)
    check_columns(rows, spec.fig_id, spec.csv_path)
    plt.close("all")
    if spec.fig_id == "fig3":
        note = _render_fig3(spec, rows)
    elif spec.fig_id == "fig4":
        note = _render_fig4(spec, rows)
    elif spec.fig_id == "fig5":
        note = _render_throughput(spec, rows, "Throughput comparison")
    else:
        note = _render_throughput(spec, rows, "Throughput vs panel size")
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    plt.savefig(out, metadata={"Software": "figtool"})
    plt.close("all")
    caption = _CAPTIONS[spec.fig_id] + (f" ({note}.)" if note else "")
    out.with_suffix(out.suffix + ".txt").write_text(caption + "\n")
    return out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="figtool", description=__doc__)
    p.add_argument("--fig", required=True, choices=sorted(REQUIRED_COLUMNS))
    p.add_argument("--in", dest="csv_path", required=True)
    p.add_argument("--out", required=True)
    args = p.parse_args(argv)
    try:
        render(FigureSpec(args.fig, args.csv_path, args.out))
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
