#!/usr/bin/env python3
"""Render publication-style figures from experiment CSV sweeps.

Usage: python figs/render.py --recipe <recipe.json> --out <file.svg>

A recipe names an input CSV, a figure id (fig2..fig8) and style options.
All physics numbers come from the CSV; this script only draws. Output is
byte-deterministic for identical (CSV, recipe) inputs: the SVG hash salt is
fixed and no timestamps are embedded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

EXPECTED_HEADERS = {
    "fig2": ["N", "beta", "omega", "epsilon", "delta",
             "T_parallel", "T_collective", "gamma"],
    "fig3": ["N", "beta", "omega", "epsilon", "delta",
             "T_parallel", "T_collective", "gamma"],
    "fig4": ["t", "E_frac", "coherence", "W", "Q", "eta_heat", "eta_ergo"],
    "fig5": ["p", "power", "eta_ergo", "eta_heat", "power_ratio", "eta_ratio"],
    "fig6": ["omega_h", "beta_h", "C_max", "P_coherent", "P_dephased", "P_diff"],
    "fig7": ["omega_h", "beta_h", "variant", "eta", "power", "C_max",
             "W1", "W2", "W4", "W5", "Qh", "Qc"],
    "fig8": ["t_cycle", "variant", "eta", "power", "converged"],
}


class RecipeError(Exception):
    pass


def load_rows(path: Path, figure_id: str) -> list[dict]:
    if not path.exists():
        raise RecipeError(f"input CSV not found: {path}")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise RecipeError(f"input CSV is empty: {path}")
        expected = EXPECTED_HEADERS[figure_id]
        if header != expected:
            missing = sorted(set(expected) - set(header))
            extra = sorted(set(header) - set(expected))
            raise RecipeError(
                f"CSV header does not match the {figure_id} schema; "
                f"missing columns {missing}, unexpected columns {extra}")
        rows = [dict(zip(header, line)) for line in reader if line]
    if not rows:
        raise RecipeError(f"input CSV has no data rows: {path}")
    return rows


def _f(row, key):
    return float(row[key])


def _series(rows, key_by, x_key, y_key):
    """Group rows into {key: (sorted xs, ys)}."""
    out = {}
    for r in rows:
        out.setdefault(r[key_by], []).append((_f(r, x_key), _f(r, y_key)))
    return {k: tuple(zip(*sorted(v))) for k, v in out.items()}


def render_fig2(rows, style, ax):
    for beta, (ns, gammas) in sorted(_series(rows, "beta", "N", "gamma").items()):
        ax.plot(ns, gammas, "o-", label=f"beta = {beta}")
    if style.get("guide", "n_squared") == "n_squared":
        ns = sorted({int(_f(r, "N")) for r in rows})
        ax.plot(ns, [n * n for n in ns], color="gray", lw=1,
                label="N^2 guide")
    ax.set_yscale("log")
    ax.set_xlabel("number of batteries N")
    ax.set_ylabel("collective advantage")
    ax.legend(frameon=False, fontsize=8)


def render_fig3(rows, style, ax):
    omega = _f(rows[0], "omega")
    for n, (betas, gammas) in sorted(
            _series(rows, "N", "beta", "gamma").items(), key=lambda kv: int(kv[0])):
        bw = [b * omega for b in betas]
        ax.plot(bw, gammas, "o-", label=f"N = {n}")
        if style.get("guide", "n_squared") == "n_squared":
            ax.axhline(int(n) ** 2, color="gray", lw=0.6, ls=":")
    ax.set_xlabel("beta * omega")
    ax.set_ylabel("collective advantage")
    ax.legend(frameon=False, fontsize=8)


def render_fig4(rows, style, ax, recipe_dir):
    ts = [_f(r, "t") for r in rows]
    ax.plot(ts, [_f(r, "E_frac") for r in rows], "-",
            label=style.get("label", "driven"))
    overlay = style.get("overlay_csv")
    if overlay:
        over_rows = load_rows(_resolve(recipe_dir, overlay), "fig4")
        ax.plot([_f(r, "t") for r in over_rows],
                [_f(r, "E_frac") for r in over_rows], "--",
                label=style.get("overlay_label", "constant"))
    ax.set_xlabel("time")
    ax.set_ylabel("fraction of energy stored")
    ax.legend(frameon=False, fontsize=8)


def render_fig5(rows, style, ax):
    ps = [_f(r, "p") for r in rows]
    ax.plot(ps, [_f(r, "power_ratio") for r in rows], "o-", label="P / P_0")
    ax.plot(ps, [_f(r, "eta_ratio") for r in rows], "s--", label="eta / eta_0")
    ax.axhline(1.0, color="gray", lw=0.6, ls=":")
    ax.set_xlabel("dephasing probability p")
    ax.set_ylabel("ratio to the constant-Hamiltonian process")
    ax.legend(frameon=False, fontsize=8)


def render_fig6(rows, style, ax):
    pts = sorted((_f(r, "C_max"), _f(r, "P_diff")) for r in rows)
    ax.plot([c for c, _ in pts], [d for _, d in pts], "o",
            label="sweep points")
    ax.set_xlabel("maximum relative entropy of coherence")
    ax.set_ylabel("power difference (coherent - dephased)")
    ax.legend(frameon=False, fontsize=8)


def render_fig7(rows, style, ax):
    quantity = style.get("quantity", "eta")
    if quantity not in ("eta", "power"):
        raise RecipeError(f"fig7 quantity must be eta or power, got {quantity!r}")
    for variant, ls in (("coherent", "-"), ("dephased", "--")):
        subset = [r for r in rows if r["variant"] == variant]
        for bh, (whs, ys) in sorted(
                _series(subset, "beta_h", "omega_h", quantity).items()):
            ax.plot(whs, ys, ls, marker="o" if ls == "-" else "s", ms=3,
                    label=f"{variant}, beta_h = {bh}")
    if quantity == "eta" and style.get("guide", "otto") == "otto":
        whs = sorted({_f(r, "omega_h") for r in rows})
        omega_c = style.get("omega_c", 1.0)
        ax.plot(whs, [1 - omega_c / w for w in whs], "k--", lw=1,
                label="Otto efficiency")
    ax.set_xlabel("hot gap omega_h")
    ax.set_ylabel("efficiency" if quantity == "eta" else "power")
    ax.legend(frameon=False, fontsize=7)


def render_fig8(rows, style, ax):
    quantity = style.get("quantity", "eta")
    work = {}
    for variant, ls in (("coherent", "-"), ("dephased", "--")):
        subset = [r for r in rows if r["variant"] == variant]
        ts, ys = zip(*sorted((_f(r, "t_cycle"), _f(r, quantity))
                             for r in subset))
        ax.plot(ts, ys, ls, marker="o" if ls == "-" else "s", ms=3,
                label=variant)
        work[variant] = {t: _f(r, "power") * _f(r, "t_cycle") > 0
                         for t, r in zip(ts, sorted(subset,
                                                    key=lambda r: _f(r, "t_cycle")))}
    # shade the no-work region below zero
    lo, hi = ax.get_ylim()
    if lo < 0:
        ax.axhspan(lo, 0.0, color="red", alpha=0.15, lw=0,
                   label="no work produced")
        ax.set_ylim(lo, hi)
    # shade cycle durations where only the coherent variant works
    only = [t for t in work["coherent"]
            if work["coherent"][t] and not work["dephased"].get(t, False)]
    for t in only:
        ax.axvspan(t * 0.97, t * 1.03, color="tab:blue", alpha=0.15, lw=0)
    if quantity == "eta" and "otto" in str(style.get("guide", "otto")):
        omega_c = style.get("omega_c")
        omega_h = style.get("omega_h")
        if omega_c and omega_h:
            ax.axhline(1 - omega_c / omega_h, color="gray", ls="--", lw=1,
                       label="Otto efficiency")
    ax.set_xlabel("cycle duration")
    ax.set_ylabel("efficiency" if quantity == "eta" else "power")
    ax.legend(frameon=False, fontsize=8)


RENDERERS = {
    "fig2": render_fig2,
    "fig3": render_fig3,
    "fig4": render_fig4,
    "fig5": render_fig5,
    "fig6": render_fig6,
    "fig7": render_fig7,
    "fig8": render_fig8,
}


def _resolve(recipe_dir: Path, path_str: str) -> Path:
    p = Path(path_str)
    return p if p.is_absolute() else (recipe_dir / p)


def render(recipe: dict, out_path: str, recipe_dir: Path | None = None) -> Path:
    figure_id = recipe.get("figure_id")
    if figure_id not in RENDERERS:
        raise RecipeError(
            f"unknown figure_id {figure_id!r}; choose from {sorted(RENDERERS)}")
    if "input_csv" not in recipe:
        raise RecipeError("recipe is missing 'input_csv'")
    recipe_dir = recipe_dir or Path.cwd()
    rows = load_rows(_resolve(recipe_dir, recipe["input_csv"]), figure_id)
    style = recipe.get("style", {})

    plt.rcParams["svg.hashsalt"] = f"qbdissim-{figure_id}"
    fig, ax = plt.subplots(figsize=style.get("figsize", (5.2, 3.6)))
    try:
        if figure_id == "fig4":
            RENDERERS[figure_id](rows, style, ax, recipe_dir)
        else:
            RENDERERS[figure_id](rows, style, ax)
        if style.get("title"):
            ax.set_title(style["title"], fontsize=10)
        fig.tight_layout()
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        metadata = {"Date": None} if out.suffix == ".svg" else None
        fig.savefig(out, metadata=metadata)
    finally:
        plt.close(fig)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="render a figure recipe")
    parser.add_argument("--recipe", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        with open(args.recipe) as f:
            recipe = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        print(f"recipe error: {e}", file=sys.stderr)
        return 2
    try:
        out = render(recipe, args.out, recipe_dir=Path(args.recipe).parent)
    except RecipeError as e:
        print(f"recipe error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
