"""Summaries of finished runs: best checkpoints, convergence fits and plots."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..evalkit import EvalReport, FitError, best_checkpoint, fit_convergence, read_csv
from .config import RunConfig
from .pipeline import CONFIG_FILE, METRICS_FILE

log = logging.getLogger(__name__)

CATEGORIES = ("N2D-fwd", "N2D-bwd", "D2N-fwd", "D2N-bwd", "Fwd", "Bwd")
FIT_CURVES = ("Fwd", "Bwd")


@dataclass
class RunSummary:
    name: str
    paradigm: str
    best: EvalReport
    fits: dict[str, tuple[float, float]]  # curve -> (A, k); NaN when the fit failed

    def row(self) -> list[str]:
        cells = [self.name, self.paradigm, str(self.best.step)]
        cells += [f"{self.best.per_category.get(c, float('nan')):.3f}" for c in CATEGORIES]
        cells.append(f"{self.best.total:.3f}")
        for c in FIT_CURVES:
            A, k = self.fits.get(c, (float("nan"), float("nan")))
            cells += [f"{A:.3f}", f"{k:.4g}"]
        return cells


def header() -> list[str]:
    cols = ["run", "paradigm", "best_step", *CATEGORIES, "Total"]
    for c in FIT_CURVES:
        cols += [f"{c}_A", f"{c}_k"]
    return cols


def curve(reports: Sequence[EvalReport], category: str) -> list[tuple[float, float]]:
    return [(float(r.step), r.per_category[category]) for r in reports if category in r.per_category]


def _fit(points) -> tuple[float, float]:
    try:
        f = fit_convergence(points)
    except FitError as exc:
        log.warning("fit did not converge, using best-so-far: %s", exc)
        f = exc.best
    except ValueError as exc:
        log.warning("fit skipped: %s", exc)
        return float("nan"), float("nan")
    return f.A, f.k


def summarize(run_dir: str | Path) -> tuple[RunSummary, list[EvalReport]]:
    run_dir = Path(run_dir)
    metrics = run_dir / METRICS_FILE
    if not metrics.exists():
        raise FileNotFoundError(f"metrics file not found: {metrics}")
    reports = read_csv(metrics)
    cfg_path = run_dir / CONFIG_FILE
    paradigm = RunConfig.load(cfg_path).paradigm if cfg_path.exists() else "?"
    fits = {c: _fit(curve(reports, c)) for c in FIT_CURVES}
    return RunSummary(run_dir.name, paradigm, best_checkpoint(reports), fits), reports


def format_table(rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.rjust(w) if j else c.ljust(w) for j, (c, w) in enumerate(zip(r, widths))) for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def plot_curves(named: dict[str, list[EvalReport]], path: Path, category: str = "total") -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, reps in named.items():
        xs = [r.step for r in reps]
        ys = [r.total if category == "total" else r.per_category.get(category, np.nan) for r in reps]
        ax.plot(xs, ys, marker="o", ms=3, label=name)
    ax.set_xlabel("step")
    ax.set_ylabel(f"{category} accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    # no date and a fixed id salt keep the SVG bytes reproducible
    plt.rcParams["svg.hashsalt"] = "maskft"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


_SEED_SUFFIX = re.compile(r"[-_]?seed=?\d+$")


def mean_curves(named: dict[str, list[EvalReport]]) -> dict[str, list[EvalReport]]:
    """Average runs whose names differ only by a ``seedN`` or ``seed=N`` suffix."""
    groups: dict[str, list[list[EvalReport]]] = {}
    for name, reps in named.items():
        key = _SEED_SUFFIX.sub("", name) or "runs"
        groups.setdefault(key, []).append(reps)
    out = {}
    for key, runs in groups.items():
        if len(runs) < 2:
            continue
        steps = sorted(set.intersection(*[{r.step for r in reps} for reps in runs]))
        means = []
        for s in steps:
            at = [next(r for r in reps if r.step == s) for reps in runs]
            cats = set.intersection(*[set(r.per_category) for r in at])
            per = {c: float(np.mean([r.per_category[c] for r in at])) for c in sorted(cats)}
            means.append(EvalReport(s, per, float(np.mean([r.total for r in at]))))
        out[f"{key} (mean of {len(runs)})"] = means
    return out


def report(run_dirs: Sequence[str | Path], out_dir: str | Path) -> list[RunSummary]:
    """Write ``summary.csv``, ``summary.txt`` and SVG accuracy plots for ``run_dirs``."""
    if not run_dirs:
        raise ValueError("no run directories given")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summaries, named = [], {}
    for d in run_dirs:
        s, reps = summarize(d)
        summaries.append(s)
        named[s.name] = reps
    named.update(mean_curves(named))
    rows = [header()] + [s.row() for s in summaries]
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    (out / "summary.txt").write_text(format_table(rows), encoding="utf-8")
    for cat in ("total", "Fwd", "Bwd"):
        plot_curves(named, out / f"accuracy_{cat}.svg", cat)
    return summaries
