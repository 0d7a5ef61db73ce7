"""Render publication-style figures from drivenjj CSV/JSON artifacts.

A figure is described by a JSON recipe:

    {
      "kind": "nocc_heatmap",
      "inputs": {"map": "nocc_map.csv", "region": "region.csv"},
      "overlays": [{"x": [...], "y": [...], "color": "tab:blue",
                    "label": "AC-Stark"}],
      "axes": {"x": [3.1, 3.5], "y": [0.0, 2.4]},
      "colormap": "inferno",
      "out": "nocc.png"
    }

Rendering never recomputes physics: every input must exist and carry the
expected schema header, and an input without data rows is an error rather
than something to interpolate. Output files are deterministic (fixed
figure size, dpi and metadata).
"""
from __future__ import annotations

import json
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.0, 4.5)
DPI = 150
PNG_METADATA = {"Software": "jjplots"}
#: effective-mode-count color range (black -> purple -> yellow progression)
NOCC_RANGE = (1.0, 10.0)


class RenderError(Exception):
    """Base class for recipe and rendering failures."""


class MissingInput(RenderError):
    """Referenced input file absent or carrying no data."""


class SchemaMismatch(RenderError):
    """Input file does not declare the expected schema."""


def read_table(path: str, schema: str):
    """Read a schema-versioned CSV into (header, float-or-str columns)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [line.rstrip("\n") for line in fh]
    except FileNotFoundError as exc:
        raise MissingInput(f"input file not found: {path}") from exc
    if not lines or not lines[0].startswith("# schema="):
        raise SchemaMismatch(f"{path}: missing '# schema=' header line")
    declared = lines[0].split("=", 1)[1].strip()
    if declared != schema:
        raise SchemaMismatch(f"{path}: schema '{declared}', expected '{schema}'")
    if len(lines) < 3:
        raise MissingInput(f"{path}: no data rows")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:] if line]
    if not rows:
        raise MissingInput(f"{path}: no data rows")
    columns = {}
    for idx, name in enumerate(header):
        values = [row[idx] for row in rows]
        try:
            columns[name] = np.array([float(v) for v in values])
        except ValueError:
            columns[name] = np.array(values)
    return columns


def _new_axes():
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    return fig, ax


def _apply_axes(ax, recipe):
    axes = recipe.get("axes", {})
    if "x" in axes:
        ax.set_xlim(axes["x"])
    if "y" in axes:
        ax.set_ylim(axes["y"])


def _draw_overlays(ax, recipe):
    for overlay in recipe.get("overlays", []):
        ax.plot(
            overlay["x"], overlay["y"],
            color=overlay.get("color", "tab:blue"),
            linestyle=overlay.get("style", "-"),
            linewidth=overlay.get("width", 1.5),
            label=overlay.get("label"),
        )


def render_nocc_heatmap(recipe, ax):
    cols = read_table(recipe["inputs"]["map"], "nocc-map-v1")
    nu = np.unique(cols["nu_d"])
    xi = np.unique(cols["xi_d"])
    grid = np.full((xi.size, nu.size), np.nan)
    conclusive = np.ones_like(grid, dtype=bool)
    for nu_v, xi_v, n_occ, status in zip(
        cols["nu_d"], cols["xi_d"], cols["n_occ"], cols["status"]
    ):
        i = int(np.searchsorted(nu, nu_v))
        j = int(np.searchsorted(xi, xi_v))
        grid[j, i] = n_occ
        conclusive[j, i] = status == "Unique"
    masked = np.ma.array(grid, mask=~conclusive | np.isnan(grid))
    cmap = plt.get_cmap(recipe.get("colormap", "inferno")).copy()
    cmap.set_bad("white")  # inconclusive points stay white
    mesh = ax.pcolormesh(
        nu, xi, masked, cmap=cmap, vmin=NOCC_RANGE[0], vmax=NOCC_RANGE[1],
        shading="nearest",
    )
    plt.colorbar(mesh, ax=ax, label="effective mode count")
    region_path = recipe.get("inputs", {}).get("region")
    if region_path:
        region = read_table(region_path, "region-v1")
        ax.plot(region["nu_d_min"], region["xi_d"], color="tab:green", lw=1.5)
        ax.plot(region["nu_d_max"], region["xi_d"], color="tab:green", lw=1.5)
    ax.set_xlabel("drive frequency")
    ax.set_ylabel("drive amplitude")


def render_poincare_portrait(recipe, ax):
    cols = read_table(recipe["inputs"]["portrait"], "portrait-v1")
    seeds = cols["seed_index"].astype(int)
    cmap = plt.get_cmap(recipe.get("colormap", "tab20"))
    for seed in np.unique(seeds):
        sel = seeds == seed
        ax.scatter(
            cols["x"][sel], cols["p"][sel], s=2.0,
            color=cmap(int(seed) % cmap.N), linewidths=0.0,
        )
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("p")


def render_bifurcation_diagram(recipe, ax):
    cols = read_table(recipe["inputs"]["branches"], "averaged-branches-v1")
    nodes = cols["stability"] == "node"
    ax.scatter(cols["R_star"][nodes], cols["delta"][nodes], s=4.0,
               color="tab:green", label="nodes", linewidths=0.0)
    ax.scatter(cols["R_star"][~nodes], cols["delta"][~nodes], s=4.0,
               color="tab:red", label="saddles", linewidths=0.0)
    ax.set_xlabel("equilibrium radius")
    ax.set_ylabel("detuning")
    ax.legend(loc="best")


def render_phase_space_panel(recipe, ax):
    cols = read_table(recipe["inputs"]["grid"], "phase-grid-v1")
    xs = np.unique(cols["x"])
    ps = np.unique(cols["p"])
    values = np.full((ps.size, xs.size), np.nan)
    for x, p, v in zip(cols["x"], cols["p"], cols["value"]):
        values[int(np.searchsorted(ps, p)), int(np.searchsorted(xs, x))] = v
    if recipe.get("diverging", values.min() < 0):
        bound = float(np.nanmax(np.abs(values)))
        mesh = ax.pcolormesh(xs, ps, values, cmap="RdBu_r",
                             vmin=-bound, vmax=bound, shading="nearest")
    else:
        mesh = ax.pcolormesh(xs, ps, values,
                             cmap=recipe.get("colormap", "viridis"),
                             shading="nearest")
    plt.colorbar(mesh, ax=ax)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("p")


def render_gap_curve(recipe, ax):
    cols = read_table(recipe["inputs"]["gaps"], "gap-scan-v1")
    order = np.argsort(cols["lambda"])
    ax.plot(cols["lambda"][order], cols["gap"][order], "o-",
            color="tab:purple")
    ax.set_xlabel("quantum scaling parameter")
    ax.set_ylabel("quasienergy gap")


KINDS = {
    "nocc_heatmap": render_nocc_heatmap,
    "poincare_portrait": render_poincare_portrait,
    "bifurcation_diagram": render_bifurcation_diagram,
    "phase_space_panel": render_phase_space_panel,
    "gap_curve": render_gap_curve,
}


def render(recipe: dict) -> str:
    """Render one figure; returns the output path."""
    kind = recipe.get("kind")
    if kind not in KINDS:
        raise RenderError(
            f"unknown figure kind {kind!r}; expected one of {sorted(KINDS)}"
        )
    if "out" not in recipe:
        raise RenderError("recipe is missing the 'out' path")
    if "inputs" not in recipe:
        raise MissingInput("recipe has no 'inputs' section")
    fig, ax = _new_axes()
    try:
        KINDS[kind](recipe, ax)
        _draw_overlays(ax, recipe)
        _apply_axes(ax, recipe)
        if recipe.get("title"):
            ax.set_title(recipe["title"])
        fig.savefig(recipe["out"], dpi=DPI, metadata=PNG_METADATA)
    finally:
        plt.close(fig)
    return recipe["out"]


def render_file(recipe_path: str) -> str:
    try:
        with open(recipe_path, encoding="utf-8") as fh:
            recipe = json.load(fh)
    except FileNotFoundError as exc:
        raise MissingInput(f"recipe not found: {recipe_path}") from exc
    except json.JSONDecodeError as exc:
        raise RenderError(f"{recipe_path}: invalid JSON ({exc})") from exc
    return render(recipe)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: render_figure <recipe.json>", file=sys.stderr)
        return 2
    try:
        out = render_file(argv[0])
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
