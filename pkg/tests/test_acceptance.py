"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed directly to the terminal.
"""

import json
import time

import numpy as np
import pytest

from conftest import circulant_matrix
from dualgrid.cli import main
from dualgrid.imaging import FORWARD, BACKWARD, convolve_periodic, shift_kernel, shifted_psf
from dualgrid.metrics import psnr, ssim
from dualgrid.phantom import (
    disc_psf,
    reference_flat_patches,
    reference_scene,
    random_scene,
    render_scene,
    simulate_measurement,
)
from dualgrid.select import (
    AlphaGrid,
    Regularizer,
    SelectionReport,
    compare_methods,
    discrepancy_select,
    dual_grid_select,
    estimate_noise,
    residual_curve,
    shift_similarity,
)
from dualgrid.solvers import TvSettings, divergence, gradient, tikhonov_deblur, tv_deblur, tv_objective

SEED = 7
LEVELS = (0.04, 0.08)


@pytest.fixture
def verdict(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, f"{label}: {detail}"
    return emit


def _measure(n, level):
    f = render_scene(reference_scene(n))
    m, p = simulate_measurement(f, 4, level, SEED)
    _, delta = estimate_noise(m, reference_flat_patches(n))
    return f, m, p, delta


@pytest.fixture(scope="module")
def tikhonov512():
    """Full 50-point Tikhonov sweeps on the 512 scene, both noise levels."""
    out = {}
    t0 = time.perf_counter()
    for level in LEVELS:
        f, m, p, delta = _measure(512, level)
        dg, dc = compare_methods(m, p, Regularizer("tikhonov"), AlphaGrid.default("tikhonov"), 0.985, delta)
        out[level] = dict(f=f, m=m, p=p, delta=delta, dual=dg, disc=dc)
    out["seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="module")
def tv256():
    """TV sweeps at n=256 with both rules sharing solves and stopping once both have chosen."""
    out = {}
    t0 = time.perf_counter()
    for level in LEVELS:
        f, m, p, delta = _measure(256, level)
        dg, dc = compare_methods(m, p, Regularizer("tv"), AlphaGrid.default("tv"), 0.97, delta, early_exit=True)
        out[level] = dict(f=f, m=m, p=p, delta=delta, dual=dg, disc=dc)
    out["seconds"] = time.perf_counter() - t0
    return out


def test_1_tikhonov_matches_dense_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    n = 16
    p = disc_psf(2, n)
    f = rng.random((n, n))
    m = convolve_periodic(f, p) + 0.01 * rng.standard_normal((n, n))
    A = circulant_matrix(p)
    errs = []
    for alpha in (0.01, 0.1, 1.0):
        dense = np.linalg.solve(A.T @ A + alpha * np.eye(n * n), A.T @ m.ravel()).reshape(n, n)
        fast = tikhonov_deblur(m, p, alpha)
        errs.append(np.linalg.norm(fast - dense) / np.linalg.norm(dense))
    dt = time.perf_counter() - t0
    ok = max(errs) <= 1e-8 and dt < 1.0
    verdict("criterion 1", ok, f"max rel err {max(errs):.2e} (<= 1e-8), {dt:.2f} s (< 1 s)")


def test_2_tv_optimality_and_adjoint(verdict):
    t0 = time.perf_counter()
    crop = np.ascontiguousarray(render_scene(reference_scene(512))[100:164, 100:164])
    m, p = simulate_measurement(crop, 4, 0.04, SEED)
    gaps = {}
    # Span of the alphas the dual-grid rule picks for TV on this scene.
    for alpha in (0.003, 0.01, 0.03):
        short = tv_objective(tv_deblur(m, p, alpha).image, m, p, alpha)
        long = tv_objective(tv_deblur(m, p, TvSettings(alpha, max_iters=5000, tol=0)).image, m, p, alpha)
        gaps[alpha] = abs(short - long) / abs(long)
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(100):
        f = rng.standard_normal((64, 64))
        g = rng.standard_normal((2, 64, 64))
        dx, dy = gradient(f)
        lhs = np.vdot(dx, g[0]) + np.vdot(dy, g[1])
        worst = max(worst, abs(lhs + np.vdot(f, divergence(g))) / abs(lhs))
    dt = time.perf_counter() - t0
    ok = max(gaps.values()) <= 1e-3 and worst <= 1e-10 and dt < 30
    detail = ", ".join(f"a={a:g}: {v:.1e}" for a, v in gaps.items())
    verdict("criterion 2", ok, f"objective gap vs 10x run [{detail}] (<= 1e-3); "
                                f"adjoint {worst:.1e} (<= 1e-10); {dt:.1f} s (< 30 s)")


def test_3_denoising_raises_shift_similarity(verdict):
    t0 = time.perf_counter()
    tikh, tv = Regularizer("tikhonov"), Regularizer("tv")
    rows = []
    for k in range(10):
        f = render_scene(random_scene(512, k, count=200))
        rows.append((shift_similarity(f), shift_similarity(f, tikh, 1.0), shift_similarity(f, tv, 0.1)))
    raw, t_mean, v_mean = np.mean(rows, axis=0)
    dt = time.perf_counter() - t0
    ok = raw < 0.97 and t_mean >= raw + 0.01 and v_mean >= raw + 0.01 and dt < 120
    verdict("criterion 3", ok, f"10 images at 512: raw {raw:.4f} (< 0.97), tikhonov {t_mean:.4f}, "
                                f"tv {v_mean:.4f} (>= raw + 0.01); {dt:.1f} s (< 120 s)")


def _single_crossing(values, target, tol):
    k = next((i for i, v in enumerate(values) if v >= target), None)
    if k is None:
        return False
    return all(v >= target - tol for v in values[k:])


def test_4_dual_grid_curve_shape(tikhonov512, verdict):
    parts, ok = [], tikhonov512["seconds"] < 120
    for level in LEVELS:
        vals = tikhonov512[level]["dual"].curve.values
        good = vals[0] < 0.9 and vals[-1] >= 0.99 and _single_crossing(vals, 0.985, 1e-3)
        ok &= good
        parts.append(f"{level:.0%}: first {vals[0]:.3f} (< 0.9), last {vals[-1]:.4f} (>= 0.99), "
                     f"single crossing {_single_crossing(vals, 0.985, 1e-3)}")
    verdict("criterion 4", ok, "; ".join(parts) + f"; {tikhonov512['seconds']:.1f} s (< 120 s)")


def test_5_noise_ordering(tikhonov512, verdict):
    a4 = tikhonov512[0.04]["dual"].chosen_alpha
    a8 = tikhonov512[0.08]["dual"].chosen_alpha
    ok = a4 is not None and a8 is not None and a8 > a4 and all(0.1 <= a <= 10 for a in (a4, a8))
    verdict("criterion 5", ok, f"alpha(4%) = {a4}, alpha(8%) = {a8} (8% > 4%, both in [0.1, 10])")


def test_6_dual_grid_vs_discrepancy(tikhonov512, tv256, verdict):
    parts, ok = [], True
    for level in LEVELS:
        dg, dc = tikhonov512[level]["dual"].chosen_alpha, tikhonov512[level]["disc"].chosen_alpha
        good = dg is not None and dc is not None and dc < dg
        ok &= good
        parts.append(f"tikhonov {level:.0%}: disc {dc:.4g} < dual {dg:.4g}")
    for level in LEVELS:
        dg, dc = tv256[level]["dual"].chosen_alpha, tv256[level]["disc"].chosen_alpha
        good = dg is not None and dc is not None and dc > dg
        ok &= good
        parts.append(f"tv n=256 {level:.0%}: disc {dc:.4g} > dual {dg:.4g}")
    ok &= tv256["seconds"] < 120
    verdict("criterion 6", ok, "; ".join(parts) + f"; TV sweeps {tv256['seconds']:.1f} s (< 120 s at n=256)")


def _psnr_gain(run):
    f, m, rep = run["f"], run["m"], run["dual"]
    return psnr(rep.reconstruction, f), psnr(m, f)


def test_7_psnr_gain_tikhonov(tikhonov512, verdict):
    rec, base = _psnr_gain(tikhonov512[0.04])
    alpha = tikhonov512[0.04]["dual"].chosen_alpha
    verdict("criterion 7 (tikhonov)", rec >= base + 0.5,
            f"alpha {alpha:.4g}: reconstruction {rec:.2f} dB vs input {base:.2f} dB (needs +0.5 dB)")


def test_7_psnr_gain_tv(tv256, verdict):
    rec, base = _psnr_gain(tv256[0.04])
    alpha = tv256[0.04]["dual"].chosen_alpha
    verdict("criterion 7 (tv, n=256)", rec >= base + 0.5,
            f"alpha {alpha:.4g}: reconstruction {rec:.2f} dB vs input {base:.2f} dB (needs +0.5 dB)")


def test_8_invariant_suite(verdict):
    t0 = time.perf_counter()
    checks = {}
    f = render_scene(reference_scene(64))
    grid = AlphaGrid.logspace(1e-4, 1e2, 20)
    tikh = Regularizer("tikhonov")

    minimal, determinism, monotone = True, True, True
    for seed in range(5):
        m, p = simulate_measurement(f, 3, 0.05, seed)
        a = dual_grid_select(m, p, tikh, grid, 0.985)
        b = dual_grid_select(m, p, tikh, grid, 0.985, workers=1)
        first = next((x for x, v in zip(a.curve.alphas, a.curve.values) if v >= 0.985), None)
        minimal &= a.chosen_alpha == first
        determinism &= a.to_json() == b.to_json()
        psi = residual_curve(m, p, tikh, grid).values
        monotone &= all(y >= x - 1e-9 for x, y in zip(psi, psi[1:]))
    checks["minimality"] = minimal
    checks["determinism"] = determinism
    checks["psi monotone"] = monotone

    unit = True
    for r in (1, 2.5, 4, 8, 15):
        base = disc_psf(r, 64)
        for q in (base, shifted_psf(base), shift_kernel(FORWARD, 64), shift_kernel(BACKWARD, 64)):
            unit &= abs(q.sum() - 1) <= 1e-12 and q.min() >= -1e-15
    checks["unit-sum psfs"] = unit

    rng = np.random.default_rng(SEED)
    checks["ssim(x,x)=1"] = all(abs(ssim(x, x) - 1) < 1e-12 for x in (f, rng.random((64, 64)), np.zeros((32, 32))))

    m, p = simulate_measurement(f, 3, 0.05, SEED)
    reg = Regularizer("tv", max_iters=60)
    rep = dual_grid_select(m, p, reg, AlphaGrid.logspace(1e-3, 1.0, 6), 0.95)
    back = SelectionReport.from_json(rep.to_json())
    rerun = dual_grid_select(m, p, back.regularizer(), back.grid(), back.settings["threshold"])
    same = rerun.to_json() == rep.to_json()
    if rep.reconstruction is not None:
        same &= rerun.reconstruction.tobytes() == rep.reconstruction.tobytes()
    checks["report rerun bit-identical"] = same

    dt = time.perf_counter() - t0
    ok = all(checks.values()) and dt < 60
    verdict("criterion 8", ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
            + f"; {dt:.1f} s (< 60 s)")


def test_9_low_noise_no_crossing(tmp_path, verdict):
    ph = tmp_path / "phantom"
    code_ph = main(["phantom", "--size", "128", "--radius", "4", "--noise", "1e-4", "--seed", str(SEED),
                    "--out-dir", str(ph), "--no-plots"])
    patches = ";".join(",".join(map(str, q)) for q in reference_flat_patches(128))
    code = main(["discrepancy", "--input", str(ph / "measurement.npy"), "--radius", "4", "--patches", patches,
                 "--alpha-count", "30", "--out-dir", str(tmp_path / "disc"), "--no-plots"])
    rep = json.loads((tmp_path / "disc" / "discrepancy.json").read_text())
    delta = rep["diagnostics"]["delta"]
    low = rep["diagnostics"]["residual_range"][0]
    ok = code_ph == 0 and code == 3 and rep["status"] == "no-crossing" and delta < low
    verdict("criterion 9", ok, f"delta {delta:.3g} < min psi {low:.3g}; status {rep['status']}, exit code {code} (3)")
