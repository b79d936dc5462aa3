"""Figure rendering from run manifests.

Usage: lpsphere-render <manifest> --kind {pbm,rate,gibbs,regime} --out out.png
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import jsonschema
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .densities import _exponent, gen_gaussian_density, solution_density

KINDS = ("pbm", "rate", "gibbs", "regime")

SCHEMA_PATH = os.path.join(os.path.dirname(__file__), "schema", "manifest.schema.json")


class RenderError(RuntimeError):
    """Manifest failed validation or a referenced table is unusable."""


@dataclass(frozen=True)
class PlotSpec:
    manifest_path: str
    kind: str
    out_path: str
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if self.dpi < 30:
            raise RenderError("dpi too small to be legible")


def load_manifest(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise RenderError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RenderError(f"manifest is not valid JSON: {exc}") from exc
    with open(SCHEMA_PATH, "r", encoding="utf-8") as fh:
        schema = json.load(fh)
    try:
        jsonschema.validate(manifest, schema)
    except jsonschema.ValidationError as exc:
        raise RenderError(f"manifest does not match the published schema: {exc.message}") from exc
    return manifest


def read_table(manifest_dir: str, fname: str) -> tuple[list[str], np.ndarray, list[list[str]]]:
    """A CSV table: skips the `# key=value` block, returns (columns, numeric
    matrix with NaN for non-numeric cells, raw string rows)."""
    path = os.path.join(manifest_dir, fname)
    if not os.path.exists(path):
        raise RenderError(f"referenced table is missing: {fname}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    body = [r for r in rows if not r[0].startswith("#")]
    if not body:
        raise RenderError(f"table {fname} has no header row")
    columns, data = body[0], body[1:]

    def to_float(cell: str) -> float:
        try:
            return float(cell)
        except ValueError:
            return math.nan

    numeric = np.array([[to_float(c) for c in row] for row in data], dtype=float)
    return columns, numeric, data


def _col(columns, numeric, name):
    try:
        return numeric[:, columns.index(name)]
    except ValueError as exc:
        raise RenderError(f"table lacks required column {name!r}") from exc


def _table_name(manifest, *candidates):
    for key in candidates:
        if key in manifest["tables"]:
            return manifest["tables"][key]
    raise RenderError(f"manifest lacks a table among {candidates}")


def _render_pbm(manifest, mdir, ax):
    cols, data, _ = read_table(mdir, _table_name(manifest, "pbm"))
    n = _col(cols, data, "n")
    ks = _col(cols, data, "ks_to_base")
    ax.loglog(n, ks, "o-", label="KS distance")
    guide = ks[0] * np.sqrt(n[0] / n)
    ax.loglog(n, guide, "k:", label=r"$n^{-1/2}$ guide")
    ax.set_xlabel("dimension n")
    ax.set_ylabel("KS distance to the base law")
    p = manifest.get("analytic", {}).get("p", manifest["config"]["p"])
    ax.set_title(f"Low-dimensional marginal convergence (p = {p})")
    ax.legend()


def _render_rate(manifest, mdir, ax):
    cols, data, _ = read_table(mdir, _table_name(manifest, "rate"))
    n = _col(cols, data, "n")
    logp = _col(cols, data, "log_prob")
    se = _col(cols, data, "std_error")
    per_n = -logp / n
    ax.errorbar(n, per_n, yerr=se / n, fmt="o", capsize=3, label=r"$-\log \hat P_n / n$")
    results = manifest.get("results", {})
    rate = results.get("analytic_rate")
    if rate is not None:
        ax.axhline(rate, color="C3", lw=1.5, label=f"analytic rate {rate:.4f}")
    slope = results.get("slope")
    if slope is not None:
        ax.plot(
            n,
            (results["intercept"] + slope * n) / n,
            "k--",
            lw=1.0,
            label=f"WLS fit (slope {slope:.4f})",
        )
    ax.set_xlabel("dimension n")
    ax.set_ylabel("decay rate estimate")
    ax.set_title("Rare-event decay vs the analytic rate")
    ax.legend()


def _render_gibbs(manifest, mdir, ax):
    name = None
    for key, fname in sorted(manifest["tables"].items()):
        if key.startswith("chain"):
            name = fname
            break
    if name is None:
        raise RenderError("gibbs manifest names no chain table")
    cols, data, _ = read_table(mdir, name)
    samples = _col(cols, data, "coord_first")
    ax.hist(samples, bins=80, density=True, alpha=0.45, color="C0", label="conditional marginal")
    analytic = manifest.get("analytic", {})
    hi = float(np.max(np.abs(samples))) * 1.1
    grid = np.linspace(-hi, hi, 400)
    if {"kappa0", "kappa_p", "kappa_q"} <= set(analytic):
        ax.plot(grid, solution_density(grid, analytic), "C3", lw=1.6, label="optimizer density")
    p = _exponent(analytic.get("p", manifest["config"]["p"]))
    ax.plot(grid, gen_gaussian_density(grid, p), "k--", lw=1.0, label="unconditioned base")
    ax.set_xlabel("scaled coordinate")
    ax.set_ylabel("density")
    ax.set_title("Conditional coordinate law")
    ax.legend()


def _render_regime(manifest, mdir, ax):
    cols, data, _ = read_table(mdir, _table_name(manifest, "curve"))
    beta = _col(cols, data, "beta")
    rate = _col(cols, data, "rate")
    ax.plot(beta, rate, "C0-o", ms=3, label="rate of the optimizer")
    analytic = manifest.get("analytic", {})
    bs, bl = analytic.get("beta_small"), analytic.get("beta_large")
    if bs is not None:
        ax.axvline(bs, color="C2", ls="--", lw=1.2, label=f"small-regime edge {bs:.4f}")
    if bl is not None:
        ax.axvline(bl, color="C3", ls="--", lw=1.2, label=f"large-regime edge {bl:.4f}")
    ax.set_xlabel(r"moment bound $\beta$")
    ax.set_ylabel("rate")
    ax.set_title("Regime diagram")
    ax.legend()


_RENDERERS = {
    "pbm": _render_pbm,
    "rate": _render_rate,
    "gibbs": _render_gibbs,
    "regime": _render_regime,
}


def render(spec: PlotSpec) -> str:
    """Render the figure described by ``spec``; returns the output path.

    Reads only the manifest and the CSV tables it names; analytic overlays
    come from closed forms of the parameters embedded in the manifest.
    """
    manifest = load_manifest(spec.manifest_path)
    mdir = os.path.dirname(os.path.abspath(spec.manifest_path))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        _RENDERERS[spec.kind](manifest, mdir, ax)
        fig.tight_layout()
        out_dir = os.path.dirname(os.path.abspath(spec.out_path))
        os.makedirs(out_dir, exist_ok=True)
        fig.savefig(spec.out_path, dpi=spec.dpi, metadata={"Software": "lpsphere-figures"})
    finally:
        plt.close(fig)
    return spec.out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lpsphere-render", description="Render lpsphere run artifacts into figures"
    )
    parser.add_argument("manifest", help="path to a run manifest.json")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True, help="output image path (.png)")
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    try:
        out = render(PlotSpec(args.manifest, args.kind, args.out, args.dpi))
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
