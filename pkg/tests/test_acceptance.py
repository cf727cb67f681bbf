"""Acceptance criteria; each test records one PASS/FAIL line for the summary."""

import math
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE, FIXTURE
from likert_responsiveness.baselines import aucpr, auroc, kendall_tau_b, spearman_rho
from likert_responsiveness.cli import main
from likert_responsiveness.inference import ResampleConfig, permutation_test
from likert_responsiveness.pipeline import GroupStatistic
from likert_responsiveness.ratings_model import LikertScale
from likert_responsiveness.reference import GUIDELINE, ReferencePairSet
from likert_responsiveness.responsiveness import evaluate_unit, harmonic_mean, mpa_values
from likert_responsiveness.simulation import (
    SimulationConfig,
    consistency_study,
    crowd_table,
    directional_checks,
    generate_world,
    label_counts,
    mean_over_seeds,
)

GOLDEN = Path(__file__).parent / "data" / "golden_report.json"

# group on violation type: (mpa, wra, tabulated hm)
TABULATED_GROUPS = {
    "White on Sexual": (0.4485, 0.6434, 0.5286),
    "Black on Sexual": (0.4360, 0.6471, 0.5210),
    "South-Asian on Sexual": (0.4275, 0.6541, 0.5171),
    "East-Asian on Sexual": (0.4061, 0.6575, 0.5021),
    "Latinx on Sexual": (0.3409, 0.6177, 0.4393),
    "GenX on Sexual": (0.5243, 0.6826, 0.5931),
    "GenZ on Sexual": (0.4632, 0.6891, 0.5540),
    "Millennial on Sexual": (0.4148, 0.6695, 0.5122),
    "Woman on Sexual": (0.4357, 0.6566, 0.5238),
    "Man on Sexual": (0.4116, 0.6646, 0.5084),
    "White on Violent": (0.3121, 0.5363, 0.3946),
    "Latinx on Violent": (0.2876, 0.5450, 0.3765),
    "Black on Violent": (0.2575, 0.5130, 0.3429),
    "South-Asian on Violent": (0.2509, 0.5408, 0.3428),
    "East-Asian on Violent": (0.2509, 0.5003, 0.3342),
    "Millennial on Violent": (0.3125, 0.5290, 0.3929),
    "GenZ on Violent": (0.2898, 0.5257, 0.3736),
    "GenX on Violent": (0.2838, 0.5418, 0.3725),
    "Woman on Violent": (0.2995, 0.5346, 0.3839),
    "Man on Violent": (0.2784, 0.5073, 0.3595),
    "Latinx on Bias": (0.2114, 0.5411, 0.3040),
    "Black on Bias": (0.2145, 0.4767, 0.2959),
    "White on Bias": (0.2056, 0.5140, 0.2937),
    "East-Asian on Bias": (0.1926, 0.5136, 0.2801),
    "South-Asian on Bias": (0.1802, 0.5163, 0.2672),
    "GenX on Bias": (0.2911, 0.5238, 0.3742),
    "GenZ on Bias": (0.2131, 0.5105, 0.3007),
    "Millennial on Bias": (0.2014, 0.4773, 0.2833),
    "Woman on Bias": (0.2407, 0.5122, 0.3275),
    "Man on Bias": (0.2362, 0.4641, 0.3131),
}


def record(n: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}: {detail}"
    assert ok, detail


def pair_set(pairs, k_max):
    s = np.array([p[0] for p in pairs])
    u = np.array([p[1] for p in pairs])
    n = len(pairs)
    return ReferencePairSet(
        LikertScale(k_max), tuple(f"i{j}" for j in range(n)), np.arange(n), s, u, np.ones(n, dtype=np.int64), GUIDELINE,
    )


def best_time(fn, repeats=50):
    best = math.inf
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def test_1_worked_fixture():
    pairs = oracles.worked_pairs()
    ps = pair_set(pairs, 4)
    s, u = ps.arrays()
    res = evaluate_unit([ps])
    got = {"mpa": res.mpa, "wra": res.wra, "hm": res.hm, "auroc": auroc(s, u)}
    want = {
        "mpa": float(oracles.mpa(pairs, 4)), "wra": float(oracles.wra(pairs, 4)),
        "hm": float(oracles.hm(oracles.mpa(pairs, 4), oracles.wra(pairs, 4))), "auroc": float(oracles.auroc(pairs)),
    }
    stated = {"mpa": 0.666667, "wra": 0.757576, "hm": 0.709220, "auroc": 0.823232}
    err = max(abs(got[k] - want[k]) for k in got)
    stated_err = max(abs(got[k] - stated[k]) for k in got)
    elapsed = best_time(lambda: (evaluate_unit([ps]), auroc(s, u)))
    ok = err <= 1e-6 and stated_err <= 1e-6 and elapsed < 1e-3
    record(1, "worked fixture", ok, f"max|err| vs oracle {err:.1e}, vs stated {stated_err:.1e}, {elapsed * 1e3:.3f} ms")


def test_2_tabulated_harmonic_means():
    t = time.perf_counter()
    errs = {k: abs(harmonic_mean(m, w) - h) for k, (m, w, h) in TABULATED_GROUPS.items()}
    elapsed = time.perf_counter() - t
    worst = max(errs, key=errs.get)
    ok = len(errs) == 30 and errs[worst] <= 5e-4 and elapsed < 1e-3
    record(2, "tabulated hm rows", ok, f"{len(errs)} rows, worst {worst} off by {errs[worst]:.1e}, {elapsed * 1e3:.3f} ms")


def test_3_extremal_mpa():
    top, bottom = [], []
    for k in range(1, 25):
        n1 = (np.arange(k + 1) >= (k + 1) // 2).astype(float)
        top.append(float(mpa_values(n1, 1 - n1)))
        bottom.append(float(mpa_values(n1[::-1].copy(), 1 - n1[::-1])))
    ok = all(v == 1.0 for v in top) and all(v == 0.0 for v in bottom)
    record(3, "extremal mpa", ok, f"K=1..24 step pattern min {min(top)}, reversed max {max(bottom)}")


def test_4_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    mismatched_nan = 0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        k = int(rng.integers(1, 9))
        s = rng.integers(0, k + 1, n)
        u = (rng.random(n) < rng.uniform(0.05, 0.95)).astype(int)
        pairs = list(zip(s.tolist(), u.tolist()))
        for fast, slow in ((kendall_tau_b, oracles.tau_b), (auroc, oracles.auroc), (aucpr, oracles.aucpr),
                           (spearman_rho, oracles.spearman)):
            got, want = fast(s, u), slow(pairs)
            if math.isnan(want) or math.isnan(got):
                mismatched_nan += math.isnan(want) != math.isnan(got)
            else:
                worst = max(worst, abs(got - want))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and mismatched_nan == 0 and elapsed < 5
    record(4, "oracle equivalence", ok, f"100 instances, max|err| {worst:.1e}, nan mismatches {mismatched_nan}, {elapsed:.2f} s")


def _directions(k_max):
    t = time.perf_counter()
    means = mean_over_seeds(SimulationConfig(k_max=k_max), range(5), bootstrap_trials=0)
    checks = directional_checks(means)
    nm, sh, co = means["normal"], means["downward_shift"], means["conservative"]
    detail = (f"K={k_max} dmpa_shift {sh['mpa'] - nm['mpa']:+.3f} dwra_shift {sh['wra'] - nm['wra']:+.3f} "
              f"dmpa_cons {co['mpa'] - nm['mpa']:+.3f} dwra_cons {co['wra'] - nm['wra']:+.3f}")
    failed = [k for k, v in checks.items() if not v]
    return not failed, detail + (f" failed {failed}" if failed else ""), time.perf_counter() - t


def test_5_simulation_directions():
    ok, detail, elapsed = _directions(4)
    record(5, "simulation directions", ok and elapsed < 30, f"{detail}, {elapsed:.1f} s")


@pytest.mark.slow
def test_6_robustness_sweep():
    start = time.perf_counter()
    results = [_directions(k) for k in (6, 12, 24)]
    elapsed = time.perf_counter() - start
    ok = all(r[0] for r in results) and elapsed < 120
    record(6, "robustness sweep", ok, "; ".join(r[1] for r in results) + f", {elapsed:.1f} s")


def _calibration_run(cfg, i, shifted):
    world = generate_world(cfg, stream=("calibration", i))
    ids = [r.rater_id for r in world.crowd]
    order = np.random.default_rng(i).permutation(len(ids))
    a = [ids[j] for j in order[: len(ids) // 2]]
    b = [ids[j] for j in order[len(ids) // 2:]]
    patterns = {r: "downward_shift" if shifted and r in b else "normal" for r in ids}
    stat = GroupStatistic(crowd_table(world, patterns), reference=GUIDELINE, labels=label_counts(world), metric="wra")
    return permutation_test(stat, a, b, ResampleConfig(permutations=1000, seed=i)).p_value


@pytest.mark.slow
def test_7_permutation_calibration():
    cfg = SimulationConfig(n_items=500, n_crowd=30, n_trained=30, seed=11)
    start = time.perf_counter()
    null = np.array([_calibration_run(cfg, i, False) for i in range(200)])
    power = np.array([_calibration_run(cfg, 1000 + i, True) for i in range(50)])
    elapsed = time.perf_counter() - start
    size, detected = float(np.mean(null < 0.05)), float(np.mean(power < 0.05))
    ok = 0.02 <= size <= 0.10 and detected >= 0.9 and elapsed < 300
    record(7, "permutation calibration", ok, f"null rejection {size:.3f} over 200, power {detected:.2f} over 50, {elapsed:.0f} s")


def _tree(root: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(root.iterdir())}


@pytest.mark.slow
def test_8_determinism(tmp_path):
    sim_cfg = tmp_path / "sim.json"
    sim_cfg.write_text('{"n_items": 300, "seed": 3}')
    outputs = {}
    for run in ("first", "second"):
        for workers in (1, 8):
            m = tmp_path / f"m_{run}_{workers}"
            s = tmp_path / f"s_{run}_{workers}"
            assert main(["metrics", "--config", str(FIXTURE / "config.json"), "--seed", "5",
                         "--workers", str(workers), "--out", str(m)]) == 0
            assert main(["simulate", "--config", str(sim_cfg), "--bootstrap-trials", "30",
                         "--workers", str(workers), "--out", str(s)]) == 0
            outputs[(run, workers)] = (_tree(m), _tree(s))
    ref = outputs[("first", 1)]
    same = all(v == ref for v in outputs.values())
    files = len(ref[0]) + len(ref[1])
    record(8, "byte determinism", same, f"{files} files identical across 2 invocations x workers {{1, 8}}" if same
           else "outputs differ")


@pytest.mark.slow
def test_9_consistency():
    mad = consistency_study(SimulationConfig(seed=0), sizes=(1000, 4000), replications=50)
    ok = all(mad[4000][m] <= mad[1000][m] for m in ("mpa", "wra"))
    record(9, "consistency", ok, ", ".join(
        f"{m} MAD {mad[1000][m]:.4f} -> {mad[4000][m]:.4f}" for m in ("mpa", "wra")))


def test_10_golden_report(tmp_path):
    assert main(["metrics", "--config", str(FIXTURE / "config.json"), "--out", str(tmp_path)]) == 0
    got, want = (tmp_path / "report.json").read_bytes(), GOLDEN.read_bytes()
    ok = got == want
    detail = f"{len(got)} bytes identical" if ok else next(
        f"first difference at byte {i}" for i, (x, y) in enumerate(zip(got + b"\0", want + b"\1")) if x != y)
    record(10, "golden report", ok, detail)
