"""Acceptance criteria, one test per criterion, each logging a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the collected lines are
printed in the terminal summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import qmc

from descent_lab import cli, io
from descent_lab.descent import (
    CONVERGED,
    DIVERGING,
    detect_outcome,
    run,
    running_grad_min,
    verify_descent_inequalities,
)
from descent_lab.flow import (
    AnnulusRegion,
    bisect_separatrix_bracket,
    contrast_discrete,
    integrate,
    separatrix_profile,
)
from descent_lab.objectives import (
    ExpNegSquare,
    PalisDeMelo,
    QuadraticBowl,
    Staircase,
    fd_gradient,
    pdm_value_polar,
)
from descent_lab.schedules import Verdict, classify, constant_scalar, log_scalar, power_scalar


def _log(log, number, name, passed, detail, elapsed=None):
    timing = "" if elapsed is None else f" [{elapsed:.2f}s]"
    log.append(f"{'PASS' if passed else 'FAIL'} criterion {number} ({name}): {detail}{timing}")
    return passed


def _harmonic_prefix(n):
    out, s = [0.0], 0.0
    for k in range(n):
        s += 1.0 / (k + 1)
        out.append(s)
    return np.array(out)


def test_criterion_1_divergence_construction(acceptance_log):
    t0 = time.perf_counter()
    s = power_scalar(1.0)
    obj = Staircase(s)
    tr = run(obj, s, 0.0, 10_000)
    elapsed = time.perf_counter() - t0
    S = _harmonic_prefix(10_000)
    bitwise = tr.x[:, 0].tobytes() == S.tobytes()
    rel = np.abs(tr.f - S / 2) / np.maximum(np.abs(S / 2), 1e-300)
    rel[0] = abs(tr.f[0])
    unit = bool(np.all(tr.grad_norm == 1.0))
    ok = bitwise and rel.max() <= 1e-12 and unit and tr.x[-1, 0] > 9 and elapsed < 1.0
    assert _log(acceptance_log, 1, "staircase divergence",
                ok, f"bitwise={bitwise} max_rel_F={rel.max():.1e} |F'|==1:{unit} "
                f"x_final={tr.x[-1, 0]:.6f}", elapsed)


def test_criterion_2_staircase_integrity(acceptance_log):
    t0 = time.perf_counter()
    obj = Staircase(power_scalar(1.0))
    spec = obj.spec
    jumps = []
    seams = []
    for j in range(50):
        pts = [spec.prefix(j)] + obj.seams(j)
        seams.extend(pts)
        for p in pts:
            jumps.append(abs(obj.value(p + 1e-9) - obj.value(p - 1e-9)))
    max_jump = max(jumps)

    rng = np.random.default_rng(0)
    worst_fd = 0.0
    for j in range(50):
        s, m = spec.prefix(j), spec.m(j)
        bounds = [0.0, 1, 3, 8, 13, 15, 16]
        for u in rng.uniform(0, 1, 40):
            x = s + u * m
            frac = (x - s) / m * 16
            if min(abs(frac - b) for b in bounds) < 0.05:
                continue
            g = obj.gradient(x)[0]
            fd = fd_gradient(obj, x, 1e-6 * m)[0]
            worst_fd = max(worst_fd, abs(g - fd) / max(abs(g), 1.0))

    grid = np.concatenate([np.linspace(-1.0, spec.prefix(50), 400_001), np.array(seams)])
    grid_min = min(obj.value(x) for x in grid)
    elapsed = time.perf_counter() - t0
    ok = max_jump < 1e-6 and worst_fd < 1e-4 and grid_min >= -3 / 32 - 1e-9 and elapsed < 10
    assert _log(acceptance_log, 2, "staircase integrity", ok,
                f"max_seam_jump={max_jump:.2e} max_fd_rel={worst_fd:.2e} grid_min={grid_min:.12f}",
                elapsed)


def test_criterion_3_pdm_integrity(acceptance_log):
    t0 = time.perf_counter()
    f = PalisDeMelo()
    angles = np.arange(360) * (2 * math.pi / 360)
    circle_ok = all(f.value((math.cos(a), math.sin(a))) == 0.0
                    and np.all(f.gradient((math.cos(a), math.sin(a))) == 0.0) for a in angles)

    u = qmc.Halton(d=2, scramble=True, seed=1).random(10_000)
    r = 3.0 * np.sqrt(u[:, 0])
    th = 2 * math.pi * u[:, 1]
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    vmin = min(f.value(p) for p in pts)

    away = pts[np.abs(np.linalg.norm(pts, axis=1) - 1) >= 0.05][:1000]
    worst_fd = 0.0
    for p in away:
        g = f.gradient(p)
        worst_fd = max(worst_fd, np.linalg.norm(g - fd_gradient(f, p, 1e-7)) / max(np.linalg.norm(g), 1.0))

    outside = pts[np.linalg.norm(pts, axis=1) > 1.05]
    polar = max(abs(f.value(p) - pdm_value_polar(p)) for p in outside)
    elapsed = time.perf_counter() - t0
    ok = circle_ok and vmin >= -1 and len(away) == 1000 and worst_fd < 1e-4 and polar < 1e-12 and elapsed < 5
    assert _log(acceptance_log, 3, "Palis-de Melo integrity", ok,
                f"circle_zero={circle_ok} min_F={vmin:.6f} fd_rel={worst_fd:.2e} "
                f"polar_err={polar:.2e}", elapsed)


def test_criterion_4_descent_inequalities(acceptance_log):
    t0 = time.perf_counter()
    obj = QuadraticBowl(1)
    tr = run(obj, power_scalar(0.5), 1.0, 100_000)
    rep = verify_descent_inequalities(tr, obj, 0.0, 2.0, constants=(1.0, 2.0))
    rmin = running_grad_min(tr, 0.0, 2.0)
    elapsed = time.perf_counter() - t0
    min_res = float(rep.residuals.min()) if rep.residuals.size else 0.0
    cumulative = float(rep.lhs[-1]) if rep.lhs.size else 0.0
    ok = (min_res >= -1e-9 and cumulative <= rep.rhs and rmin[-1] < 1e-3 and not rep.empty_range
          and elapsed < 1.0)
    assert _log(acceptance_log, 4, "stopped descent inequalities", ok,
                f"K={rep.K} min_residual={min_res:.2e} lhs={cumulative:.6g} rhs={rep.rhs:.6g} "
                f"running_min={rmin[-1]:.2e}", elapsed)


def _predicates(tr, tol_x, tol_g, esc, frac):
    """Independent re-derivation of the two outcome predicates."""
    n = len(tr)
    tail = tr.x[n - math.ceil(frac * n):]
    diam = float(tail.max() - tail.min())  # all suite runs are 1-D
    norms = np.linalg.norm(tr.x, axis=1)
    quarter = norms[n - max(2, math.ceil(n / 4)):]
    conv = diam < tol_x and tr.grad_norm[-1] < tol_g and norms[-1] <= esc
    div = norms[-1] > esc and np.all(np.diff(quarter) >= 0) and quarter[-1] > quarter[0]
    return conv, div


def test_criterion_5_outcome_trichotomy(acceptance_log):
    t0 = time.perf_counter()
    quad = run(QuadraticBowl(1), power_scalar(0.5), 3.0, 10_000)
    s = power_scalar(1.0)
    stair = run(Staircase(s), s, 0.0, 10_000)
    ens = run(ExpNegSquare(), power_scalar(0.25, 2.0), 1.0, 10_000)
    o_quad = detect_outcome(quad)
    o_stair = detect_outcome(stair, escape_radius=5.0)
    o_ens = detect_outcome(ens, escape_radius=3.0)
    both = 0
    for tr in (quad, stair, ens):
        for tol_x in (1e-12, 1e-6, 1e-2, 10.0):
            for tol_g in (1e-12, 1e-6, 1e-2, 10.0):
                for esc in (0.5, 3.0, 5.0, 1e3):
                    for frac in (0.05, 0.1, 0.5):
                        conv, div = _predicates(tr, tol_x, tol_g, esc, frac)
                        kind = detect_outcome(tr, tol_x, tol_g, esc, frac).kind
                        both += conv and div
                        assert not (kind == CONVERGED and not conv)
                        assert not (kind == DIVERGING and not div)
    elapsed = time.perf_counter() - t0
    ok = (o_quad.kind == CONVERGED and o_stair.kind == DIVERGING and o_ens.kind == DIVERGING
          and ens.grad_norm[-1] < 1e-4 and both == 0 and elapsed < 5)
    assert _log(acceptance_log, 5, "outcome trichotomy", ok,
                f"quadratic={o_quad.kind} staircase={o_stair.kind} exp_neg_square={o_ens.kind} "
                f"(|grad|={ens.grad_norm[-1]:.2e}) both_predicates={both}", elapsed)


def test_criterion_6_schedule_classifier(acceptance_log):
    t0 = time.perf_counter()
    quarter = classify(power_scalar(0.25), 100_000, q_grid=(2.0, 5.0))
    logr = classify(log_scalar(), 100_000, q_grid=(2.0, 4.0, 8.0))
    const = classify(constant_scalar(0.1), 100_000)
    elapsed = time.perf_counter() - t0
    q5 = quarter.q_verdicts[5.0] is Verdict.CONSISTENT
    q2 = quarter.q_verdicts[2.0] is Verdict.INCONSISTENT
    logs = all(logr.q_verdicts[q] is Verdict.INCONSISTENT for q in (2.0, 4.0, 8.0))
    dim = const.verdicts["diminishing"] is Verdict.INCONSISTENT
    ok = q5 and q2 and logs and dim and elapsed < 5
    assert _log(acceptance_log, 6, "schedule classifier", ok,
                f"power1/4 q=5:{quarter.q_verdicts[5.0]} q=2:{quarter.q_verdicts[2.0]} "
                f"log q=2,4,8:{[str(logr.q_verdicts[q]) for q in (2.0, 4.0, 8.0)]} "
                f"constant diminishing:{const.verdicts['diminishing']}", elapsed)


def test_criterion_7_continuous_flow(acceptance_log):
    t0 = time.perf_counter()
    tol = 1e-8
    quad = integrate(QuadraticBowl(2), (1.0, 0.0), 1.0, tol, 1e-12)
    err = float(np.linalg.norm(quad.y[-1] - np.array([math.exp(-1.0), 0.0])))
    runs = [quad,
            integrate(QuadraticBowl(2), (1.0, 2.0), 5.0, tol, 1e-12),
            integrate(ExpNegSquare(), (0.3,), 20.0, tol, 1e-12),
            integrate(PalisDeMelo(), (1.25, 0.0), 5.0, tol, 1e-12),
            integrate(PalisDeMelo(), (0.5, 0.2), 5.0, tol, 1e-12),
            integrate(PalisDeMelo(), (1.2, 0.0), 50.0, tol, 1e-12)]
    worst = max(abs(r.energy_residual) / (10 * tol * (1 + abs(r.f[0]))) for r in runs)
    elapsed = time.perf_counter() - t0
    ok = err < tol and worst < 1.0 and elapsed < 5
    assert _log(acceptance_log, 7, "continuous flow", ok,
                f"endpoint_err={err:.2e} worst_residual/bound={worst:.3f} runs={len(runs)}", elapsed)


@pytest.fixture(scope="module")
def separatrix_runs():
    t0 = time.perf_counter()
    bracket = bisect_separatrix_bracket(T=100.0, iters=40)
    flow = integrate(PalisDeMelo(), (bracket.r_star, 0.0), 200.0, 1e-10, 1e-13)
    contrast = contrast_discrete(bracket.r_star, power_scalar(0.75, 0.1), 100_000, T=200.0)
    elapsed = time.perf_counter() - t0
    # Reference for the exact separatrix, followed stably in reverse time.
    profile = separatrix_profile(2 * math.pi)
    return bracket, flow, contrast, profile, elapsed


def test_criterion_8a_bisection(acceptance_log, separatrix_runs):
    bracket, _, _, profile, elapsed = separatrix_runs
    lo, hi = 1 + 1 / (2 * math.pi), 1 + 1 / math.pi
    ok = lo < bracket.r_star < hi and elapsed < 60
    assert _log(acceptance_log, "8a", "separatrix bisection", ok,
                f"r_star={bracket.r_star:.15f} in ({lo:.6f}, {hi:.6f}); reverse-time "
                f"r_star={profile.r_star:.15f}", elapsed)


def test_criterion_8b_winding_in_annulus(acceptance_log, separatrix_runs):
    _, flow, _, profile, _ = separatrix_runs
    exit_idx = AnnulusRegion().first_exit(flow)
    inside = flow.winding[: exit_idx] if exit_idx is not None else flow.winding
    w_inside = float(np.max(np.abs(inside)))
    exit_t = float(flow.t[exit_idx]) if exit_idx is not None else None
    exact = profile.winding_at(200.0)
    passed_full = w_inside >= 6 * math.pi
    passed_down = w_inside >= 2 * math.pi
    ok = passed_full or passed_down
    assert _log(acceptance_log, "8b", "winding inside annulus", ok,
                f"winding_inside={w_inside:.4f} rad (need 6pi={6 * math.pi:.3f}, downgrade "
                f"2pi={2 * math.pi:.3f}); first_exit_t={exit_t}; exact separatrix winds "
                f"{exact:.4f} rad by T=200")


def test_criterion_8c_discrete_contrast(acceptance_log, separatrix_runs):
    _, _, contrast, _, _ = separatrix_runs
    out = contrast.outcome
    ok = (out.kind == CONVERGED and out.final_grad_norm < 1e-3
          and contrast.discrete_tail_winding < 0.01)
    assert _log(acceptance_log, "8c", "discrete descent from r_star", ok,
                f"outcome={out.kind} |grad|={out.final_grad_norm:.3e} |x|={out.final_norm:.4f} "
                f"tail_winding={contrast.discrete_tail_winding:.4e} rad")


def test_criterion_9_determinism_round_trip(acceptance_log, tmp_path):
    t0 = time.perf_counter()
    gd = ("[experiment]\nkind = run-gd\nx0 = 1.2, 0.1\nbudget = 2000\n[objective]\n"
          "name = palis_de_melo\n[schedule]\nname = power\nexponent = 0.75\nscale = 0.1\n"
          "[output]\nsvg = false\n")
    fl = ("[experiment]\nkind = run-flow\nx0 = 1.25, 0\nT = 5\n[objective]\nname = palis_de_melo\n"
          "[output]\nsvg = false\n")
    same = True
    for text, fname in ((gd, "run-gd_trace.csv"), (fl, "run-flow_flow.csv")):
        blobs = []
        for d in ("a", "b"):
            cfg = cli.parse_config(text, out_dir=str(tmp_path / d), env={})
            cli.execute(cfg)
            blobs.append((tmp_path / d / fname).read_bytes())
        same &= blobs[0] == blobs[1]
    tr = run(PalisDeMelo(), power_scalar(0.75, 0.1), (1.2, 0.1), 2000)
    back, _ = io.read_trace_csv(tmp_path / "a" / "run-gd_trace.csv")
    bitwise = all(getattr(tr, k).tobytes() == getattr(back, k).tobytes()
                  for k in ("x", "f", "grad_norm", "lambda_min", "lambda_max"))
    fback = io.read_flow_csv(tmp_path / "a" / "run-flow_flow.csv")
    ftr = integrate(PalisDeMelo(), (1.25, 0.0), 5.0, 1e-8, 1e-12)
    fbitwise = all(getattr(ftr, k).tobytes() == getattr(fback, k).tobytes()
                   for k in ("t", "y", "f", "grad_norm", "dissipation", "winding"))
    elapsed = time.perf_counter() - t0
    ok = same and bitwise and fbitwise and elapsed < 1.0
    assert _log(acceptance_log, 9, "determinism and round-trip", ok,
                f"byte_identical={same} trace_bitwise={bitwise} flow_bitwise={fbitwise}", elapsed)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
