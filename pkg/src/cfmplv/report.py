"""Figure data and rendered figures for experiment reports.

Each figure is written three ways: a whitespace-delimited ``.dat`` file, a
gnuplot script that plots it, and a PNG rendered with matplotlib.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import ExperimentReport, upper_pairs  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}
COLORS = {"cfm": "tab:blue", "direct": "tab:red"}
LABELS = {"cfm": "CFM", "direct": "Direct"}


def _write_dat(path, header, rows):
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for r in rows:
            fh.write(" ".join("nan" if v is None else repr(float(v)) for v in r) + "\n")


def curve_rows(report, kind):
    rows = []
    for c in report.cells:
        if c["kind"] != kind:
            continue
        e, d = c["cfm"]["error"], c["direct"]["error"]
        rows.append((c["level"], e["mean"], e["q05"], e["q95"], d["mean"], d["q05"], d["q95"]))
    return sorted(rows)


def calibration_rows(report, kind):
    rows = []
    for c in report.cells:
        if c["kind"] != kind:
            continue
        for b in c["calibration"]:
            if b["count"]:
                rows.append((b["mean_p"], b["empirical_freq"], b["count"], c["level"]))
    return rows


CURVES_GP = """set terminal pngcairo size 800,560
set output '{stem}.gp.png'
set xlabel 'noise level'
set ylabel 'absolute PLV error'
set key top left
plot '{stem}.dat' using 1:3:4 with filledcurves fs transparent solid 0.25 lc rgb 'blue' title 'CFM 5-95%', \\
     '' using 1:2 with linespoints lc rgb 'blue' title 'CFM mean', \\
     '' using 1:6:7 with filledcurves fs transparent solid 0.25 lc rgb 'red' title 'Direct 5-95%', \\
     '' using 1:5 with linespoints lc rgb 'red' title 'Direct mean'
"""

CALIBRATION_GP = """set terminal pngcairo size 560,560
set output '{stem}.gp.png'
set xlabel 'mean posterior probability'
set ylabel 'empirical frequency'
set xrange [0:1]
set yrange [0:1]
set size square
plot x with lines dt 2 lc rgb 'gray' notitle, \\
     '{stem}.dat' using 1:2 with points pt 7 title 'bins'
"""

SCATTER_GP = """set terminal pngcairo size 560,560
set output '{stem}.gp.png'
set xlabel 'naive PLV'
set ylabel 'model-based PLV'
set xrange [0:1]
set yrange [0:1]
set size square
plot x with lines dt 2 lc rgb 'gray' notitle, '{stem}.dat' using 1:2 with points pt 7 notitle
"""


def write_plot_data(report, outdir):
    """Write ``.dat`` files and gnuplot scripts; returns the paths written."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    kinds = list(dict.fromkeys(c["kind"] for c in report.cells))
    for kind in kinds:
        stem = os.path.join(outdir, f"curves_{kind}")
        _write_dat(stem + ".dat", ["level", "cfm_mean", "cfm_q05", "cfm_q95",
                                   "direct_mean", "direct_q05", "direct_q95"],
                   curve_rows(report, kind))
        stem_c = os.path.join(outdir, f"calibration_{kind}")
        _write_dat(stem_c + ".dat", ["mean_p", "empirical_freq", "count", "level"],
                   calibration_rows(report, kind))
        for s, tpl in ((stem, CURVES_GP), (stem_c, CALIBRATION_GP)):
            with open(s + ".gp", "w") as fh:
                fh.write(tpl.format(stem=os.path.basename(s)))
            written += [s + ".dat", s + ".gp"]
    stem = os.path.join(outdir, "clean_scatter")
    _write_dat(stem + ".dat", ["naive_plv", "cfm_plv"],
               zip(upper_pairs(np.asarray(report.truth["naive_clean"])),
                   upper_pairs(np.asarray(report.truth["cfm_clean"]))))
    with open(stem + ".gp", "w") as fh:
        fh.write(SCATTER_GP.format(stem="clean_scatter"))
    written += [stem + ".dat", stem + ".gp"]
    return written


def plot_error_curves(report, kind, ax):
    rows = np.array(curve_rows(report, kind), dtype=float)
    if rows.size == 0:
        return
    x = rows[:, 0]
    for method, col in (("cfm", 1), ("direct", 4)):
        ax.fill_between(x, rows[:, col + 1], rows[:, col + 2], color=COLORS[method], alpha=0.2,
                        linewidth=0)
        ax.plot(x, rows[:, col], "o-", color=COLORS[method], label=LABELS[method], ms=3)
    ax.set_xlabel(f"{kind} noise level")
    ax.set_ylabel("absolute PLV error")
    ax.legend(frameon=False)


def plot_calibration(report, kind, ax, vmin=None, vmax=None):
    """Bin-level calibration points coloured by noise level; returns the scatter artist."""
    rows = calibration_rows(report, kind)
    ax.plot([0, 1], [0, 1], "--", color="0.6", lw=1)
    sc = None
    if rows:
        r = np.array(rows, dtype=float)
        sc = ax.scatter(r[:, 0], r[:, 1], c=r[:, 3], s=10 + 2 * r[:, 2], cmap="viridis",
                        vmin=vmin, vmax=vmax, clip_on=False, zorder=3)
    ax.set_xlim(-0.03, 1.03)
    ax.set_ylim(-0.03, 1.03)
    ax.set_aspect("equal")
    ax.set_xlabel("mean posterior probability")
    ax.set_ylabel("empirical frequency")
    ax.set_title(kind)
    return sc


def render_figures(report, outdir):
    """Render PNG figures; returns the paths written."""
    os.makedirs(outdir, exist_ok=True)
    kinds = list(dict.fromkeys(c["kind"] for c in report.cells))
    written = []
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        naive = upper_pairs(np.asarray(report.truth["naive_clean"]))
        cfm = upper_pairs(np.asarray(report.truth["cfm_clean"]))
        ax.plot([0, 1], [0, 1], "--", color="0.6", lw=1)
        ax.scatter(naive, cfm, s=8)
        ax.set_xlabel("naive PLV")
        ax.set_ylabel("model-based PLV")
        ax.set_aspect("equal")
        path = os.path.join(outdir, "clean_scatter.png")
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

        if kinds:
            fig, axes = plt.subplots(1, len(kinds), figsize=(5.0 * len(kinds), 3.6), squeeze=False)
            for kind, ax in zip(kinds, axes[0]):
                plot_error_curves(report, kind, ax)
            path = os.path.join(outdir, "error_curves.png")
            fig.savefig(path)
            plt.close(fig)
            written.append(path)

            fig, axes = plt.subplots(1, len(kinds), figsize=(4.0 * len(kinds) + 1.0, 4.0),
                                     squeeze=False)
            levels = [c["level"] for c in report.cells]
            artists = [plot_calibration(report, kind, ax, min(levels), max(levels))
                       for kind, ax in zip(kinds, axes[0])]
            artists = [a for a in artists if a is not None]
            if artists:
                fig.colorbar(artists[0], ax=list(axes[0]), label="noise level", shrink=0.8)
            path = os.path.join(outdir, "calibration.png")
            fig.savefig(path)
            plt.close(fig)
            written.append(path)
    return written


def build_report(report_path, outdir, figures=True):
    report = ExperimentReport.read_json(report_path)
    written = write_plot_data(report, outdir)
    if figures:
        written += render_figures(report, outdir)
    return written
