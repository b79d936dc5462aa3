import hashlib
import json
import math
import os

import numpy as np
import pytest

from lpsphere_figures import (
    PlotSpec,
    RenderError,
    exp_family_density,
    gen_gaussian_density,
    render,
    scaled_family_density,
)
from lpsphere_figures.densities import solution_density

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")
KIND_DIRS = {"pbm": "pbm", "rate": "rate", "gibbs": "gibbs", "regime": "regime"}


def manifest_path(kind):
    return os.path.join(GOLDEN, KIND_DIRS[kind], "manifest.json")


def tree_checksums(root):
    sums = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            p = os.path.join(dirpath, f)
            with open(p, "rb") as fh:
                sums[p] = hashlib.sha256(fh.read()).hexdigest()
    return sums


@pytest.mark.parametrize("kind", list(KIND_DIRS))
def test_renders_each_kind_without_touching_inputs(kind, tmp_path):
    before = tree_checksums(os.path.join(GOLDEN, KIND_DIRS[kind]))
    out = str(tmp_path / f"{kind}.png")
    produced = render(PlotSpec(manifest_path(kind), kind, out, dpi=110))
    assert produced == out
    with open(out, "rb") as fh:
        header = fh.read(8)
    assert header == b"\x89PNG\r\n\x1a\n"
    assert os.path.getsize(out) > 5000
    # presentation must not recompute or mutate anything it read
    assert tree_checksums(os.path.join(GOLDEN, KIND_DIRS[kind])) == before


def test_render_is_deterministic(tmp_path):
    a, b = str(tmp_path / "a.png"), str(tmp_path / "b.png")
    render(PlotSpec(manifest_path("regime"), "regime", a))
    render(PlotSpec(manifest_path("regime"), "regime", b))
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_overlay_matches_manifest_parameters_pointwise():
    # the gibbs overlay evaluated on 100 grid points must equal the closed
    # form of the manifest's own (kappa, p, q) parameters to 1e-9
    with open(manifest_path("gibbs"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    analytic = manifest["analytic"]
    grid = np.linspace(-4.0, 4.0, 100)
    ours = solution_density(grid, analytic)
    k0, kp, kq = analytic["kappa0"], analytic["kappa_p"], analytic["kappa_q"]
    p, q = float(analytic["p"]), float(analytic["q"])
    direct = np.exp(-1.0 - k0 - kp * np.abs(grid) ** p - kq * np.abs(grid) ** q)
    assert np.max(np.abs(ours - direct)) < 1e-9
    # and the rate overlay value equals the manifest's rate field
    with open(manifest_path("rate"), encoding="utf-8") as fh:
        rate_manifest = json.load(fh)
    assert rate_manifest["results"]["analytic_rate"] == pytest.approx(0.4189385, abs=1e-6)


def test_density_formulas_normalize():
    grid = np.linspace(-30.0, 30.0, 200001)
    dx = grid[1] - grid[0]
    trapezoid = getattr(np, "trapezoid", np.trapz)
    assert trapezoid(gen_gaussian_density(grid, 2.0), dx=dx) == pytest.approx(1.0, abs=1e-6)
    assert trapezoid(scaled_family_density(grid, 1.0, 0.5), dx=dx) == pytest.approx(
        1.0, abs=1e-6
    )
    # uniform case for infinite exponent
    assert gen_gaussian_density(np.array([0.5, 2.0]), math.inf).tolist() == [0.5, 0.0]


def test_exp_family_reduces_to_scaled_family():
    # with kappa_p = 0 and kappa_q = 1/(beta q) the exponential family is
    # exactly the scaled q-family; the manifest supplies kappa0 accordingly
    beta, q = 0.5, 1.0
    kq = 1.0 / (beta * q)
    z = 2.0 * (beta * q) ** (1.0 / q) * math.gamma(1.0 + 1.0 / q)
    k0 = math.log(z) - 1.0
    grid = np.linspace(-3.0, 3.0, 100)
    a = exp_family_density(grid, k0, 0.0, kq, 2.0, q)
    b = scaled_family_density(grid, q, beta)
    assert np.max(np.abs(a - b)) < 1e-12


class TestErrors:
    def test_unknown_kind(self):
        with pytest.raises(RenderError):
            PlotSpec(manifest_path("pbm"), "spiral", "x.png")

    def test_schema_mismatch(self, tmp_path):
        bad = tmp_path / "manifest.json"
        with open(manifest_path("pbm"), encoding="utf-8") as fh:
            manifest = json.load(fh)
        manifest["config"]["n_list"] = []  # schema requires at least one entry
        bad.write_text(json.dumps(manifest))
        with pytest.raises(RenderError):
            render(PlotSpec(str(bad), "pbm", str(tmp_path / "o.png")))

    def test_missing_csv(self, tmp_path):
        with open(manifest_path("pbm"), encoding="utf-8") as fh:
            manifest = json.load(fh)
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(RenderError):
            render(PlotSpec(str(tmp_path / "manifest.json"), "pbm", str(tmp_path / "o.png")))

    def test_invalid_json(self, tmp_path):
        bad = tmp_path / "manifest.json"
        bad.write_text("{ not json")
        with pytest.raises(RenderError):
            render(PlotSpec(str(bad), "pbm", str(tmp_path / "o.png")))


def test_cli_end_to_end(tmp_path):
    from lpsphere_figures.render import main

    out = str(tmp_path / "fig.png")
    assert main([manifest_path("pbm"), "--kind", "pbm", "--out", out]) == 0
    assert os.path.exists(out)
    assert main([str(tmp_path / "missing.json"), "--kind", "pbm", "--out", out]) == 1
