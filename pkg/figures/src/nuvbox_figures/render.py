"""Figure registry and renderers.

Every figure is produced from the CSV files (plus JSON sidecars) written by
the ``nuvbox`` CLI; rendering is deterministic: fixed figure size, DPI, and
fonts, no timestamps in the output files.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 110
_BAND = "#f4c7c3"  # feasible-band fill
_BAND2 = "#c3d7f4"  # alternate corridor fill
_LINE = "#1f4e96"
_ACCENT = "#b03a2e"

plt.rcParams.update(
    {
        "figure.dpi": DPI,
        "savefig.dpi": DPI,
        "font.family": "DejaVu Sans",
        "font.size": 9,
        "axes.grid": True,
        "grid.linestyle": ":",
        "grid.alpha": 0.6,
    }
)


class SchemaError(Exception):
    """Input CSV does not match the expected schema; names the offending column."""


def _read_csv(path: str) -> Dict[str, List[str]]:
    if not os.path.exists(path):
        raise SchemaError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file (no header)")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return {col: [row[i] for row in rows] for i, col in enumerate(header)}


def _require(table: Dict[str, List[str]], cols: Tuple[str, ...], path: str) -> None:
    for col in cols:
        if col not in table:
            raise SchemaError(f"{path}: missing column '{col}'")


def _floats(values: List[str]) -> np.ndarray:
    return np.array([float(v) if v != "" else np.nan for v in values])


def _sidecar(csv_path: str) -> Optional[dict]:
    path = os.path.splitext(csv_path)[0] + ".json"
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return json.load(fh)


def _save(fig, out_path: str) -> None:
    fig.savefig(out_path, metadata={"Software": "nuvbox-figures"})
    plt.close(fig)


# ---------------------------------------------------------------- cost curves


def _render_cost_curve(spec: "PlotSpec", in_dir: str, out_path: str) -> None:
    path = os.path.join(in_dir, spec.inputs[0])
    table = _read_csv(path)
    _require(table, ("x", "kappa"), path)
    x, kappa = _floats(table["x"]), _floats(table["kappa"])
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    feasible = kappa <= 1e-12
    if feasible.any() and not feasible.all():
        ax.axvspan(x[feasible].min(), x[feasible].max(), color=_BAND, lw=0, label="feasible set")
    ax.plot(x, kappa, color=_LINE, lw=1.6, label=r"$\kappa(x)$")
    ax.set_xlabel("x")
    ax.set_ylabel("cost")
    ax.set_title(spec.title)
    ax.legend(loc="upper right")
    _save(fig, out_path)


def _render_cost_surface(spec: "PlotSpec", in_dir: str, out_path: str) -> None:
    path = os.path.join(in_dir, spec.inputs[0])
    table = _read_csv(path)
    _require(table, ("y1", "y2", "kappa"), path)
    y1, y2, kappa = _floats(table["y1"]), _floats(table["y2"]), _floats(table["kappa"])
    g1, g2 = np.unique(y1), np.unique(y2)
    Z = kappa.reshape(len(g2), len(g1))
    fig, ax = plt.subplots(figsize=(5.4, 4.4))
    mesh = ax.pcolormesh(g1, g2, Z, shading="nearest", cmap="viridis")
    ax.contour(g1, g2, Z, levels=[1e-9], colors=[_ACCENT], linewidths=1.2)
    fig.colorbar(mesh, ax=ax, label="cost")
    ax.set_xlabel("y1")
    ax.set_ylabel("y2")
    ax.set_title(spec.title)
    _save(fig, out_path)


# ------------------------------------------------------------ characteristics


def _render_characteristic(spec: "PlotSpec", in_dir: str, out_path: str) -> None:
    path = os.path.join(in_dir, spec.inputs[0])
    table = _read_csv(path)
    _require(table, ("mu", "s_sq", "x_hat", "oracle_x_hat", "feasible_flag"), path)
    mu = _floats(table["mu"])
    s_sq = _floats(table["s_sq"])
    x_hat = _floats(table["x_hat"])
    meta = _sidecar(path) or {}
    prior = meta.get("prior", {})
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    if prior.get("kind") == "box":
        ax.axhspan(prior["a"], prior["b"], color=_BAND, lw=0, label="feasible band")
    elif prior.get("kind") == "halfspace":
        lo, hi = (prior["a"], np.nanmax(x_hat)) if prior.get("side") == "ge" else (np.nanmin(x_hat), prior["a"])
        ax.axhspan(lo, hi, color=_BAND, lw=0, label="feasible half-line")
    ax.plot(mu, mu, color="0.55", lw=0.9, ls="--", label=r"$\hat{x}=\mu$")
    for val in sorted(set(s_sq)):
        mask = s_sq == val
        ax.plot(mu[mask], x_hat[mask], lw=1.5, label=f"$s^2$ = {val:g}")
    ax.set_xlabel(r"$\mu$")
    ax.set_ylabel(r"$\hat{x}$")
    ax.set_title(spec.title)
    ax.legend(loc="upper left", fontsize=8)
    _save(fig, out_path)


# ------------------------------------------------------------ scenario panels


def _scenario_tables(path: str):
    table = _read_csv(path)
    _require(table, ("k", "channel", "kind", "mean", "variance", "lower", "upper", "violation"), path)
    k = _floats(table["k"])
    mean = _floats(table["mean"])
    lower = _floats(table["lower"])
    upper = _floats(table["upper"])
    out: Dict[Tuple[str, str], dict] = {}
    for i, (kind, channel) in enumerate(zip(table["kind"], table["channel"])):
        entry = out.setdefault((kind, channel), {"k": [], "mean": [], "lower": [], "upper": []})
        entry["k"].append(k[i])
        entry["mean"].append(mean[i])
        entry["lower"].append(lower[i])
        entry["upper"].append(upper[i])
    return {key: {c: np.array(v) for c, v in entry.items()} for key, entry in out.items()}


def _series(tables, kind: str, channel: str):
    try:
        return tables[(kind, channel)]
    except KeyError:
        raise SchemaError(f"missing series kind={kind!r} channel={channel!r}")


def _plot_bound_lines(ax, series, **kwargs):
    for col in ("lower", "upper"):
        vals = series[col]
        if np.isfinite(vals).any():
            ax.plot(series["k"], vals, color="k", ls="--", lw=0.9, **kwargs)


def _target_overlay(ax, meta):
    target = (meta or {}).get("target")
    if not target:
        return
    ks = np.arange(target["range"][0], target["range"][1] + 1)
    ax.plot(ks, target["values"], color="0.4", ls=":", lw=1.2, label="target")


def _shifted_bands(ax, meta, color=_BAND2):
    for blk in (meta or {}).get("constraint_blocks", []):
        if blk["kind"] == "shifted_box":
            ks = np.arange(blk["range"][0], blk["range"][1] + 1)
            lo, hi = np.array(blk["lo"]), np.array(blk["hi"])
            off = np.array(blk["offset"])
            ax.fill_between(ks, lo, hi, color=color, lw=0, alpha=0.8)
            ax.fill_between(ks, lo - off, hi - off, color=_BAND, lw=0, alpha=0.8)
        elif blk["kind"] == "box" and blk["on"] == "output":
            ks = np.arange(blk["range"][0], blk["range"][1] + 1)
            ax.fill_between(ks, blk["lo"], blk["hi"], color=_BAND, lw=0, alpha=0.8)


def _render_tracking(spec, in_dir, out_path, y_channel="y", u_channel="u"):
    path = os.path.join(in_dir, spec.inputs[0])
    tables = _scenario_tables(path)
    meta = _sidecar(path)
    fig, (ax_y, ax_u) = plt.subplots(2, 1, figsize=(6.8, 4.8), sharex=True)
    y = _series(tables, "y", y_channel)
    _target_overlay(ax_y, meta)
    band = np.isfinite(y["lower"]) | np.isfinite(y["upper"])
    if band.any():
        ax_y.fill_between(y["k"], np.where(np.isfinite(y["lower"]), y["lower"], y["mean"].min()),
                          np.where(np.isfinite(y["upper"]), y["upper"], y["mean"].max()),
                          color=_BAND, lw=0, alpha=0.8, label="corridor")
    ax_y.plot(y["k"], y["mean"], color=_LINE, lw=1.4, label="output")
    ax_y.set_ylabel(y_channel)
    ax_y.legend(loc="best", fontsize=8)
    u = _series(tables, "u", u_channel)
    ax_u.step(u["k"], u["mean"], where="mid", color=_ACCENT, lw=1.2, label="input")
    _plot_bound_lines(ax_u, u)
    ax_u.set_xlabel("k")
    ax_u.set_ylabel(u_channel)
    ax_u.legend(loc="best", fontsize=8)
    fig.suptitle(spec.title)
    _save(fig, out_path)


def _render_corridor(spec, in_dir, out_path, with_shift=False):
    path = os.path.join(in_dir, spec.inputs[0])
    tables = _scenario_tables(path)
    meta = _sidecar(path)
    nrows = 3 if with_shift else 2
    fig, axes = plt.subplots(nrows, 1, figsize=(6.8, 2.1 * nrows + 0.8), sharex=True)
    ax_y, ax_u = axes[0], axes[1]
    _shifted_bands(ax_y, meta)
    y = _series(tables, "y", "y")
    ax_y.plot(y["k"], y["mean"], color=_LINE, lw=1.4, label="output")
    _target_overlay(ax_y, meta)
    ax_y.set_ylabel("y")
    ax_y.legend(loc="best", fontsize=8)
    u = _series(tables, "u", "u")
    ax_u.step(u["k"], u["mean"], where="mid", color=_ACCENT, lw=1.2)
    ax_u.set_ylabel("u (ternary)")
    ax_u.set_yticks([-1, 0, 1])
    if with_shift:
        ax_s = axes[2]
        shift = next((tables[key] for key in tables if key[0] == "u" and key[1].startswith("shift:")), None)
        if shift is None:
            raise SchemaError("missing series kind='u' channel='shift:*'")
        ax_s.step(shift["k"], shift["mean"], where="mid", color="0.3", lw=1.2)
        ax_s.set_ylabel("shift s")
        ax_s.set_xlabel("k")
    else:
        ax_u.set_xlabel("k")
    fig.suptitle(spec.title)
    _save(fig, out_path)


def _render_flappy(spec, in_dir, out_path):
    path = os.path.join(in_dir, spec.inputs[0])
    tables = _scenario_tables(path)
    meta = _sidecar(path)
    fig, (ax_y, ax_u) = plt.subplots(2, 1, figsize=(6.8, 4.8), sharex=True)
    _shifted_bands(ax_y, meta)
    y = _series(tables, "y", "height")
    ax_y.plot(y["k"], y["mean"], color=_LINE, lw=1.4)
    ax_y.set_ylabel("height")
    u = _series(tables, "u", "flap")
    ax_u.stem(u["k"], u["mean"], linefmt="C3-", markerfmt="C3.", basefmt="k-")
    ax_u.set_ylabel("flap")
    ax_u.set_xlabel("k")
    fig.suptitle(spec.title)
    _save(fig, out_path)


def _polygon_vertices(faces: List[dict]) -> np.ndarray:
    """Vertices of a bounded 2-D polyhedron from its half-space faces."""
    lines = [(np.array(f["normal"]), f["offset"], f["side"]) for f in faces]
    pts = []
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            A = np.vstack([lines[i][0], lines[j][0]])
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            p = np.linalg.solve(A, np.array([lines[i][1], lines[j][1]]))
            ok = all(
                (n @ p >= a - 1e-9) if side == "ge" else (n @ p <= a + 1e-9)
                for n, a, side in lines
            )
            if ok:
                pts.append(p)
    pts = np.array(pts)
    center = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
    return pts[order]


def _render_waypoints(spec, in_dir, out_path):
    path = os.path.join(in_dir, spec.inputs[0])
    tables = _scenario_tables(path)
    meta = _sidecar(path) or {}
    p1 = _series(tables, "y", "py1")
    p2 = _series(tables, "y", "py2")
    fig, ax = plt.subplots(figsize=(5.8, 5.0))
    for blk in meta.get("constraint_blocks", []):
        if blk["kind"] != "polyhedron":
            continue
        verts = _polygon_vertices(blk["faces"])
        ax.fill(verts[:, 0], verts[:, 1], color=_BAND, lw=1.0, ec=_ACCENT, alpha=0.85, zorder=1)
        at = blk["at"]
        idx = int(np.where(p1["k"] == at)[0][0])
        ax.plot(p1["mean"][idx], p2["mean"][idx], "o", color=_LINE, ms=6, zorder=3)
        ax.annotate(f"k={at}", (p1["mean"][idx], p2["mean"][idx]), textcoords="offset points", xytext=(6, 6), fontsize=8)
    ax.plot(p1["mean"], p2["mean"], color=_LINE, lw=1.2, zorder=2, label="trajectory")
    ax.set_xlabel("py1")
    ax.set_ylabel("py2")
    ax.set_title(spec.title)
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    _save(fig, out_path)


def _render_reservoir(spec, in_dir, out_path):
    path = os.path.join(in_dir, spec.inputs[0])
    tables = _scenario_tables(path)
    fig, axes = plt.subplots(3, 1, figsize=(6.8, 7.0), sharex=True)
    for name in ("V1", "V2", "V3"):
        s = _series(tables, "y", name)
        axes[0].plot(s["k"], s["mean"], lw=1.3, label=name)
    _plot_bound_lines(axes[0], _series(tables, "y", "V3"))
    axes[0].set_ylabel("levels")
    axes[0].legend(loc="best", fontsize=8, ncol=3)
    for name in ("f12", "f13", "f23", "f3out"):
        s = _series(tables, "y", name)
        axes[1].plot(s["k"], s["mean"], lw=1.2, label=name)
    axes[1].set_ylabel("flow rates")
    axes[1].legend(loc="best", fontsize=8, ncol=4)
    for name in ("d12", "d13", "d23", "d3out"):
        s = _series(tables, "u", name)
        axes[2].step(s["k"], s["mean"], where="mid", lw=1.1, label=name)
    axes[2].set_ylabel("rate increments")
    axes[2].set_xlabel("k")
    axes[2].legend(loc="best", fontsize=8, ncol=4)
    fig.suptitle(spec.title)
    _save(fig, out_path)


@dataclass(frozen=True)
class PlotSpec:
    """One renderable figure: id, required CSV inputs, draw function."""

    figure_id: str
    inputs: Tuple[str, ...]
    title: str
    draw: Callable[["PlotSpec", str, str], None]


FIGURES: Dict[str, PlotSpec] = {
    spec.figure_id: spec
    for spec in [
        PlotSpec("fig01", ("cost_laplace.csv",), "Sparsifying cost", _render_cost_curve),
        PlotSpec("fig02", ("cost_box.csv",), "Box-constraint cost", _render_cost_curve),
        PlotSpec("fig05", ("sweep_box.csv",), "Box-constrained estimate vs. likelihood mean", _render_characteristic),
        PlotSpec("fig07", ("cost_halfspace_ge.csv",), "Half-space cost (x >= a)", _render_cost_curve),
        PlotSpec("fig08", ("cost_halfspace_le.csv",), "Half-space cost (x <= a)", _render_cost_curve),
        PlotSpec("fig09", ("sweep_halfspace.csv",), "Half-space-constrained estimate vs. likelihood mean", _render_characteristic),
        PlotSpec("fig10", ("scenario_box-input.csv",), "Tracking with box-constrained inputs", _render_tracking),
        PlotSpec("fig11", ("scenario_corridor-output.csv",), "Output corridor with ternary inputs", _render_corridor),
        PlotSpec(
            "fig12",
            ("scenario_shifted-corridors.csv",),
            "Two corridors via a binary shift",
            lambda s, i, o: _render_corridor(s, i, o, with_shift=True),
        ),
        PlotSpec("fig14", ("scenario_flappy-bird.csv",), "Binary control through double slits", _render_flappy),
        PlotSpec("fig15", ("scenario_halfspace-input.csv",), "Tracking with lower-bounded inputs", _render_tracking),
        PlotSpec("fig16", ("cost_polyhedron.csv",), "Convex polyhedron cost surface", _render_cost_surface),
        PlotSpec("fig18", ("scenario_polyhedron-waypoints.csv",), "Waypoints in convex polyhedrons", _render_waypoints),
        PlotSpec("fig19", ("scenario_reservoir.csv",), "Reservoir balancing", _render_reservoir),
    ]
}


def renderable_figures(in_dir: str) -> List[str]:
    """Figure ids whose input CSVs are all present in ``in_dir``."""
    return [
        fid
        for fid, spec in sorted(FIGURES.items())
        if all(os.path.exists(os.path.join(in_dir, name)) for name in spec.inputs)
    ]


def render(figure_id: str, in_dir: str, out_dir: str) -> str:
    """Render one figure id; returns the written image path."""
    try:
        spec = FIGURES[figure_id]
    except KeyError:
        raise SchemaError(f"unknown figure id {figure_id!r}; known: {', '.join(sorted(FIGURES))}")
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, f"{figure_id}.png")
    spec.draw(spec, in_dir, out_path)
    return out_path
