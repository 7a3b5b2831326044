"""Acceptance criteria 1-11, one PASS/FAIL line each at the stated tolerances."""
import json
import time

import numpy as np

from conftest import base_projection
from wgroupoid import harness as H
from wgroupoid import suites as S
from wgroupoid import vb
from wgroupoid import vbpoisson as vp
from wgroupoid.algebra import AlgebraDescriptor

SEEDS = (0, 1, 2)
ALGEBRAS = ("M2", "C+M2", "M3")


def ctx(name, seed, n):
    desc = AlgebraDescriptor.parse(name)
    rng = np.random.default_rng([seed, 7919])
    return S.Context(desc, base_projection(desc, rng), rng, n)


def measure(fn, n, algebras=ALGEBRAS, seeds=SEEDS, components=None):
    """Largest residual (or selected components) over algebras and seeds."""
    worst = 0.0
    for a in algebras:
        for s in seeds:
            out = fn(ctx(a, s, n))
            if out.skipped * 2 > out.samples + out.skipped:
                return np.inf
            r = max(out.detail[k] for k in components) if components else out.residual
            worst = max(worst, float(r))
    return worst


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def within(items):
    """items: (label, residual, tol). True iff every residual is within its tolerance."""
    ok = all(r <= tol for _, r, tol in items)
    return ok, "; ".join(f"{lab}={r:.1e}<={tol:.0e}" for lab, r, tol in items)


def test_criterion_01_groupoid_axioms(capsys):
    t0 = time.perf_counter()
    worst = {}
    for a in ("M2", "M3", "C+M2", "M2+M2"):
        out = S.groupoid_axioms(ctx(a, 0, 0), pairs=1000, triples=300)
        worst[a] = out.residual
    dt = time.perf_counter() - t0
    ok, txt = within([(a, r, 1e-9) for a, r in worst.items()])
    report(capsys, 1, ok and dt < 10, f"{txt}; {dt:.1f}s<10s")


def test_criterion_02_atlas(capsys):
    items = [
        ("chart_phi", measure(S.groupoid_chart_round_trip, 200), 1e-9),
        ("chart_psi", measure(S.groupoid_psi_round_trip, 200), 1e-9),
        ("bundle_chart", measure(S.bundle_chart_check, 200), 1e-9),
        ("t_chart", measure(S.tangent_chart_round_trip, 200), 1e-9),
        ("lattice_transition", measure(S.groupoid_lattice_transition, 200), 1e-8),
        ("groupoid_transition", measure(S.groupoid_psi_transition, 200), 1e-8),
        ("t_transition", measure(S.tangent_transition, 200, components=("recompute", "cocycle")), 1e-8),
        ("cotangent_chart", measure(S.poisson_cotangent_atlas, 200), 1e-8),
    ]
    report(capsys, 2, *within(items))


def test_criterion_03_singleton_components(capsys):
    out = S.groupoid_pi_singleton(ctx("C+M2", 0, 200))
    report(capsys, 3, out.residual == 0 and out.samples == 204,
           f"mismatches={out.residual:g} over {out.samples} projections")


def test_criterion_04_cocycle(capsys):
    items = [
        ("cocycle_law", measure(S.tangent_cocycle_law, 100, seeds=(0,)), 1e-8),
        ("frames", measure(S.tangent_cocycle_frames, 100, seeds=(0,), components=("frame",)), 1e-8),
        ("fd", measure(S.tangent_cocycle_frames, 100, seeds=(0,),
                       components=("generator", "groupoid_frame")), 1e-6),
    ]
    report(capsys, 4, *within(items))


def test_criterion_05_algebroid(capsys):
    items = [
        ("jacobi", measure(S.algebroid_jacobi, 10), 1e-8),
        ("anchor_fd", measure(S.algebroid_anchor_morphism, 10), 1e-6),
        ("cross_representation", measure(S.algebroid_cross_representation, 10), 1e-7),
    ]
    report(capsys, 5, *within(items))


def test_criterion_06_pbracket_jacobi(capsys):
    r = measure(S.poisson_algebra, 100, seeds=(0,), components=("jacobi",))
    report(capsys, 6, *within([("jacobi", r, 1e-9)]))


def test_criterion_07_momentum_map(capsys):
    items = [
        ("poisson_map", measure(S.poisson_J1, 200, seeds=(0,)), 1e-9),
        ("polarity", measure(S.poisson_polarity, 50, seeds=(0,)), 1e-9),
        ("rank_defects", measure(S.poisson_J1_rank, 50, seeds=(0,)), 1e-9),
    ]
    report(capsys, 7, *within(items))


def test_criterion_08_reduction(capsys):
    J1, pull = 0.0, 0.0
    for a in ALGEBRAS:
        out = S.poisson_reduction(ctx(a, 0, 20))
        J1, pull = max(J1, out.detail["J1"]), max(pull, out.detail["pullback"])
    items = [("iota_star", measure(S.poisson_iota_star, 20), 1e-9), ("J1_zero", J1, 1e-12), ("pullback", pull, 1e-8)]
    report(capsys, 8, *within(items))


def test_criterion_09_vb_groupoids(capsys):
    items, p0s = [], [ctx(a, s, 0).p0 for a in ALGEBRAS for s in SEEDS]
    for name in vb.CATALOGUE:
        r = max(vb.vb_check(vb.CATALOGUE[name](p0), 10, seed=i)["max_residual"] for i, p0 in enumerate(p0s))
        items.append((f"vb_check[{name}]", r, 1e-10))
    core_bad = 0
    for name in vb.CORE_DIMS:
        for p0 in p0s:
            core = vb.core_compute(vb.CATALOGUE[name](p0))
            core_bad += int(core.dim != vb.CORE_DIMS[name](p0) or not core.matches)
    items.append(("core_dim_mismatches", float(core_bad), 0.0))
    for primal, dual in vb.DUAL_PAIRS.items():
        r = max(vb.compare_specs(vb.CATALOGUE[dual](p0), vb.dualize(vb.CATALOGUE[primal](p0)), 4, i)
                for i, p0 in enumerate(p0s))
        items.append((f"dualize[{primal}]", r, 1e-10))
    for primal in ("action", "tangent-pair"):
        p0 = p0s[0]
        spec = vb.CATALOGUE[primal](p0)
        items.append((f"double_dual[{primal}]", vb.compare_specs(spec, vb.dualize(vb.dualize(spec)), 2), 1e-10))
    items.append(("sharp", max(vp.sharp_morphism_check(p0, 20, i)["max_residual"] for i, p0 in enumerate(p0s)),
                  1e-12))
    items.append(("exactness", max(vp.exactness_check(p0, 10, i) for i, p0 in enumerate(p0s)), 1e-10))
    seq = [vb.exact_sequence_check(p0, 5, i) for i, p0 in enumerate(p0s[:3])]
    items.append(("sequences", max(r["morphism_residual"] + (np.inf if r["exactness_failures"] else 0)
                                   for r in seq), 1e-10))
    for kind in ("middle", "gauge-cotangent", "rightmost"):
        items.append((f"jacobi[{kind}]", max(vp.jacobi_check(p0, kind, 5, i) for i, p0 in enumerate(p0s)), 1e-9))
    for gid in vp.SUB_POISSON_GROUPOIDS:
        reps = [vp.sub_poisson_groupoid_check(gid, p0, 10, i) for i, p0 in enumerate(p0s)]
        items.append((f"morphism[{gid}]", 0.0 if all(r["passed"] for r in reps) else np.inf, 0.0))
    report(capsys, 9, *within(items))


def test_criterion_10_involution(capsys):
    wrong = sum(S.involution_fixed_points(ctx(a, s, 112)).residual for a in ALGEBRAS for s in SEEDS)
    items = [
        ("misclassified_of_1008", wrong, 0.0),
        ("perp_oracle", measure(S.involution_perp, 50, components=("oracle",)), 1e-9),
        ("perp_orthocomplement", measure(S.involution_perp, 50, components=("range", "involutive")), 1e-9),
        ("t_family", S.involution_t_family(ctx("M2", 0, 3)).residual, 1e-12),
    ]
    report(capsys, 10, *within(items))


def test_criterion_11_default_run(capsys, tmp_path):
    out = tmp_path / "report.json"
    t0 = time.perf_counter()
    code = H.main(["run", "--json", str(out)])
    dt = time.perf_counter() - t0
    first = json.loads(out.read_text())
    second = H.run().to_dict(with_times=False)
    for row in first["checks"]:
        row.pop("wall_time")
    first.pop("wall_time")
    same = json.loads(json.dumps(second, sort_keys=True, default=float)) == first
    report(capsys, 11, code == 0 and dt < 120 and same,
           f"exit={code}; {dt:.1f}s<120s; deterministic={same}")
