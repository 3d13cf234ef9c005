"""Acceptance gate.

Each test checks one criterion at its stated tolerance and records a
PASS/FAIL line that conftest prints in the terminal summary.  The
Monte-Carlo criteria (3, 4, 5) share one experiment: 10,000 null
calibration patterns and 1000 test patterns per cell, with all three
statistics evaluated on the same patterns.  Expect roughly half an hour on
one core; set CYLPERSIST_WORKERS to use more.
"""

import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from cylpersist.directed_network import (
    beta_arrow,
    build_dsf,
    build_gilbert,
    directed_persistence,
    stabilization_radius_dsf,
)
from cylpersist.filtration import build_complex
from cylpersist.persistence import (
    ESSENTIAL,
    Block,
    betti,
    block_count,
    compute_persistence,
    persistent_betti,
    persistent_betti_oracle,
)
from cylpersist.point_process import PointPattern, Window, sample_poisson
from cylpersist.seeding import derive_seed, make_rng
from cylpersist.statistics import (
    APF,
    BetaArrow,
    ClusterDeaths,
    DirectedAPF,
    ExperimentConfig,
    default_workers,
    normality_diagnostics,
    rejection_experiment,
    variance_scaling_check,
)

SPECS = (DirectedAPF(), ClusterDeaths(), APF())
LABELS = ("T_L(DSF)", "T_C", "T_L(Cech)")
INTENSITIES = (1.6, 2.0, 2.4)


@pytest.fixture(scope="session")
def experiment(acceptance_cache):
    config = ExperimentConfig(specs=SPECS, n_reps=1000, n_cal=10_000, seed=2024)
    tables = rejection_experiment(config, default_workers(), acceptance_cache)
    return config, tables, Path(acceptance_cache)


def test_criterion_1_oracle_equivalence(record_criterion):
    start = time.perf_counter()
    rng = make_rng(derive_seed(1, 1))
    grid = np.linspace(0.0, 1.0, 5)
    pairs = [(r, s) for r, s in itertools.product(grid, grid) if r <= s]
    checks = mismatches = 0
    for _ in range(200):
        pts = rng.uniform(0, 5, size=(int(rng.integers(1, 11)), 2))
        for kind in ("cech", "vr"):
            c = build_complex(pts, kind, 1.0)
            d = compute_persistence(c)
            for q in (0, 1):
                for r, s in pairs:
                    checks += 1
                    mismatches += persistent_betti(d, q, r, s) != persistent_betti_oracle(c, q, r, s)
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 120
    record_criterion(1, "oracle equivalence", ok,
                     f"{checks} comparisons, {mismatches} mismatches, {elapsed:.1f} s")
    assert mismatches == 0
    assert elapsed < 120


def test_criterion_2_analytic_diagrams(record_criterion):
    s3 = math.sqrt(3)
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, s3 / 2]])
    square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    expected = {
        ("triangle", "cech"): [(0, 0, 0.5), (0, 0, 0.5), (0, 0, ESSENTIAL), (1, 0.5, 1 / s3)],
        ("triangle", "vr"): [(0, 0, 0.5), (0, 0, 0.5), (0, 0, ESSENTIAL)],
        ("square", "cech"): [(0, 0, 0.5)] * 3 + [(0, 0, ESSENTIAL), (1, 0.5, math.sqrt(2) / 2)],
        ("square", "vr"): [(0, 0, 0.5)] * 3 + [(0, 0, ESSENTIAL), (1, 0.5, math.sqrt(2) / 2)],
    }
    worst, bad = 0.0, []
    for (shape, kind), want in expected.items():
        pts = tri if shape == "triangle" else square
        got = [p for p in compute_persistence(build_complex(pts, kind, 1.0)).sorted_points()
               if p[0] <= 1]
        if len(got) != len(want) or any(g[0] != w[0] for g, w in zip(got, want)):
            bad.append(f"{shape}/{kind}")
            continue
        for g, w in zip(got, want):
            for a, b in ((g[1], w[1]), (g[2], w[2])):
                if math.isinf(a) or math.isinf(b):
                    if a != b:
                        bad.append(f"{shape}/{kind}")
                else:
                    worst = max(worst, abs(a - b))
    ok = not bad and worst <= 1e-12
    record_criterion(2, "analytic diagrams", ok,
                     f"max abs error {worst:.1e}, mismatched diagrams: {bad or 'none'}")
    assert not bad
    assert worst <= 1e-12


def test_criterion_3_null_level(experiment, record_criterion):
    _, tables, _ = experiment
    rates = {(lab, lam): tab.rate(lam, "poisson")
             for lab, tab in zip(LABELS, tables) for lam in INTENSITIES}
    outside = {k: v for k, v in rates.items() if not 0.02 <= v <= 0.08}
    detail = "; ".join(f"{lab} " + "/".join(f"{100 * rates[lab, lam]:.1f}%" for lam in INTENSITIES)
                       for lab in LABELS)
    record_criterion(3, "null rejection rate in [2%, 8%]", not outside, detail)
    assert not outside


def test_criterion_4_power_patterns(experiment, record_criterion):
    _, tables, _ = experiment
    tc, tl = tables[1], tables[2]
    tc_str = [tc.rate(lam, "strauss") for lam in INTENSITIES]
    tl_str = [tl.rate(lam, "strauss") for lam in INTENSITIES]
    tc_mat = [tc.rate(lam, "matern") for lam in INTENSITIES]
    tl_mat = [tl.rate(lam, "matern") for lam in INTENSITIES]
    parts = {
        "T_C Str increasing, last >= 80%": tc_str[0] < tc_str[1] < tc_str[2] and tc_str[2] >= 0.8,
        "T_L Str decreasing, first >= 60%": tl_str[0] > tl_str[1] > tl_str[2] and tl_str[0] >= 0.6,
        "T_C MatC >= 25%": min(tc_mat) >= 0.25,
        "T_L MatC >= 25%": min(tl_mat) >= 0.25,
    }

    def fmt(xs):
        return "/".join(f"{100 * x:.1f}%" for x in xs)

    detail = (f"T_C Str {fmt(tc_str)}, T_L Str {fmt(tl_str)}, T_C MatC {fmt(tc_mat)}, "
              f"T_L MatC {fmt(tl_mat)}; failed: "
              + (", ".join(k for k, v in parts.items() if not v) or "none"))
    record_criterion(4, "power patterns", all(parts.values()), detail)
    for name, ok in parts.items():
        assert ok, name


def test_criterion_5_gaussianity(experiment, record_criterion):
    config, _, cache = experiment
    row = config.intensities.index(2.0)
    values = np.array(json.loads((cache / f"cal_{row}.json").read_text())["values"])
    assert values.shape == (10_000, len(SPECS))
    failed, parts = [], []
    for k, lab in enumerate(LABELS):
        rep = normality_diagnostics(values[:, k])
        parts.append(f"{lab} ks {rep.ks_distance:.4f} skew {rep.skewness:+.3f} "
                     f"kurt {rep.excess_kurtosis:+.3f}")
        if not (rep.ks_distance <= 0.03 and abs(rep.skewness) <= 0.15
                and abs(rep.excess_kurtosis) <= 0.3):
            failed.append(lab)
    record_criterion(5, "Gaussianity at intensity 2", not failed, "; ".join(parts))
    assert not failed


def test_criterion_6_variance_scaling(record_criterion):
    rows = variance_scaling_check(BetaArrow(), 5.0, [20, 40], 2000, intensity=1.0,
                                  seed=derive_seed(6, 0))
    r20, r40 = rows[0].ratio, rows[1].ratio
    rel = abs(r20 - r40) / max(r20, r40)
    record_criterion(6, "variance scaling", rel <= 0.2,
                     f"Var/n {r20:.4f} (n=20) vs {r40:.4f} (n=40), relative gap {100 * rel:.1f}%")
    assert rel <= 0.2


def _local_edges(p):
    return {e for e in build_dsf(p).edge_coordinates() if -0.5 <= e[0][0] <= 0.5}


def test_criterion_7_stabilization(record_criterion):
    window = Window(-15, 30, 0, 5)
    violations = 0
    for k in range(200):
        p = sample_poisson(window, 1.0, derive_seed(7, k))
        radius = stabilization_radius_dsf(p)
        keep = p.points[p.points[:, 0] <= radius]
        right = Window(radius, window.x_max, window.y_min, window.y_max)
        fresh = sample_poisson(right, 1.0, derive_seed(7, k, 1)).points
        fresh = fresh[fresh[:, 0] > radius]
        q = PointPattern(np.vstack([keep, fresh]), window)
        violations += _local_edges(p) != _local_edges(q)
    record_criterion(7, "stabilization", violations == 0, f"200 patterns, {violations} violations")
    assert violations == 0


def _elder_violations(rng, n_instances):
    bad = 0
    for k in range(n_instances):
        pts = rng.uniform([-10, 0], [10, 5], size=(int(rng.integers(2, 80)), 2))
        p = PointPattern(pts, Window(-10, 10, 0, 5))
        net = build_dsf(p) if k % 2 else build_gilbert(p, 1.0)
        try:
            d = directed_persistence(net)
        except AssertionError:
            bad += 1
            continue
        # every dying branch meets an older one that outlives it
        for i in np.flatnonzero(np.isfinite(d.deaths)):
            others = np.arange(len(d)) != i
            if not np.any(others & (d.births <= d.births[i]) & (d.deaths > d.deaths[i])):
                bad += 1
    return bad


def _face_violations(rng, n_instances):
    bad = 0
    for k in range(n_instances):
        pts = rng.uniform(0, 4, size=(int(rng.integers(3, 30)), 2))
        c = build_complex(pts, "cech" if k % 2 else "vr", float(rng.uniform(0.3, 1.5)))
        value = {s.vertices: s.value for s in c.simplices}
        for s in c.simplices:
            for face in itertools.combinations(s.vertices, len(s.vertices) - 1):
                if face and value[face] > s.value:
                    bad += 1
    return bad


def _euler_violations(rng, n_instances):
    bad = 0
    for k in range(n_instances):
        pts = rng.uniform(0, 4, size=(int(rng.integers(1, 30)), 2))
        T = float(rng.uniform(0.3, 1.5))
        c = build_complex(pts, "cech" if k % 2 else "vr", T)
        d = compute_persistence(c)
        for t in np.linspace(0, T, 6):
            chi = c.count(0, t) - c.count(1, t) + c.count(2, t)
            bad += chi != betti(d, 0, t) - betti(d, 1, t) + betti(d, 2, t)
    return bad


def _block_violations(rng, n_instances):
    bad = 0
    for k in range(n_instances):
        pts = rng.uniform(0, 4, size=(int(rng.integers(2, 25)), 2))
        d = compute_persistence(build_complex(pts, "cech" if k % 2 else "vr", 1.0))
        b = np.sort(rng.uniform(0, 1, 3))
        e = np.sort(rng.uniform(0, 1.2, 3))
        for q in (0, 1):
            whole = block_count(d, q, Block(b[0], b[2], e[0], e[2]))
            pieces = sum(block_count(d, q, Block(b[i], b[i + 1], e[j], e[j + 1]))
                         for i in range(2) for j in range(2))
            bad += whole != pieces
    return bad


def _betti_monotonicity_violations(rng, n_instances):
    bad = 0
    levels = np.linspace(0, 1, 7)
    for k in range(n_instances):
        pts = rng.uniform(0, 4, size=(int(rng.integers(2, 25)), 2))
        d = compute_persistence(build_complex(pts, "cech" if k % 2 else "vr", 1.0))
        for q in (0, 1):
            for i, j in itertools.product(range(7), range(7)):
                if i + 1 <= j:
                    bad += persistent_betti(d, q, levels[i + 1], levels[j]) < persistent_betti(
                        d, q, levels[i], levels[j])
                if i <= j < 6:
                    bad += persistent_betti(d, q, levels[i], levels[j + 1]) > persistent_betti(
                        d, q, levels[i], levels[j])
        # directed persistent Betti numbers on a DSF
        p = PointPattern(rng.uniform([-5, 0], [5, 2], size=(30, 2)), Window(-5, 5, 0, 2))
        diag = directed_persistence(build_dsf(p))
        tab = np.array([[beta_arrow(diag, 10, r, s) for s in np.linspace(0, 5, 6)]
                        for r in np.linspace(-0.5, 0.5, 6)])
        bad += int((np.diff(tab, axis=0) < 0).sum() + (np.diff(tab, axis=1) > 0).sum())
    return bad


def test_criterion_8_property_suites(record_criterion):
    rng = make_rng(derive_seed(8, 0))
    n = 500
    results = {
        "elder rule": _elder_violations(rng, n),
        "face monotonicity": _face_violations(rng, n),
        "Euler consistency": _euler_violations(rng, n),
        "block additivity": _block_violations(rng, n),
        "persistent Betti monotonicity": _betti_monotonicity_violations(rng, n),
    }
    total = sum(results.values())
    record_criterion(8, "property suites", total == 0,
                     f"{n} instances each; violations " +
                     ", ".join(f"{k} {v}" for k, v in results.items()))
    assert total == 0
