"""Acceptance gate: one test per criterion, each printing a PASS line with
the measured values (run with ``pytest tests/test_acceptance.py -v -s``).

The desk-scale pipeline (labels, grid-trained model, evaluation, sweep) is
built once per session and shared by the criteria that need it.
"""

import json
import os
import time

import numpy as np
import pytest

from loadplan.datagen import generate_dataset, generate_sweep, make_synthetic_terminal
from loadplan.formulations import solve_gdo, solve_model1, validate_plan
from loadplan.greedy import greedy_solve
from loadplan.metrics import (
    normalized_distance,
    shifted_geomean,
    total_variation,
)
from loadplan.network import Scenario, restrict_scenario
from loadplan.oracles import (
    brute_force_dlpp,
    case1_solve,
    case2_solve,
    case3_solve,
    case4_solve,
    case5_set_cover,
)
from loadplan.proxy import SEARCH_GRID, TrainingConfig, proxy_solve, train
from loadplan.restoration import PredictedPlan, restore_detailed, violation_lp

from conftest import (
    cover_doc,
    fig8_doc,
    instance_from_doc,
    random_doc,
    single_type_doc,
    t1_doc,
    two_pair_doc,
)

TIME_LIMIT = 30.0


def report(name: str, detail: str):
    print(f"\nACCEPTANCE {name}: PASS ({detail})")


# ---------------------------------------------------------------------------
# Shared desk-scale pipeline


@pytest.fixture(scope="session")
def desk():
    """Synthetic terminal (10 pairs, 50 commodities), 500 labeled instances,
    grid-trained proxy, held-out evaluation, and a 50-step volume sweep."""
    t0 = time.perf_counter()
    fam = make_synthetic_terminal(seed=11)
    ds = generate_dataset(fam, n=500, seed=3, stage_time_limit=15)
    assert ds.n_failed == 0
    model, history = train(
        ds.to_training_data(), TrainingConfig(seed=7, epochs=150), grid=SEARCH_GRID
    )

    gaps, shares, proxy_times, gdo_times = [], [], [], []
    for item in ds.instances_of_split("test"):
        inst = item.instance
        t = time.perf_counter()
        plan, rep, _ = proxy_solve(model, inst, TIME_LIMIT)
        proxy_times.append(time.perf_counter() - t)
        validate_plan(inst, plan)
        res, _ = solve_model1(inst, TIME_LIMIT)
        gaps.append(max((plan.objective - res.objective) / res.objective, 0.0))
        added_cap = sum(
            inst.trailer_types[v].capacity * n for (s, v), n in rep.added.items()
        )
        total_cap = sum(
            inst.trailer_types[v].capacity * n for (s, v), n in plan.y.items()
        )
        shares.append(1.0 - added_cap / total_cap if total_cap else 1.0)
        t = time.perf_counter()
        solve_gdo(inst, TIME_LIMIT)
        gdo_times.append(time.perf_counter() - t)

    domain = fam.compatible_columns()
    gamma = fam.reference_plan
    sweep = {"m1": [], "gdo": [], "proxy": [], "m1_delta": [], "gdo_delta": []}
    for scale, inst in generate_sweep(fam, 50):
        _, p1 = solve_model1(inst, TIME_LIMIT)
        g = solve_gdo(inst, TIME_LIMIT)
        pp, _, _ = proxy_solve(model, inst, TIME_LIMIT)
        sweep["m1"].append(p1.count_vector(domain))
        sweep["gdo"].append(g.plan.count_vector(domain))
        sweep["proxy"].append(pp.count_vector(domain))
        sweep["m1_delta"].append(normalized_distance(p1.y, gamma.gamma, domain))
        sweep["gdo_delta"].append(normalized_distance(g.plan.y, gamma.gamma, domain))

    return {
        "fam": fam,
        "dataset": ds,
        "model": model,
        "gaps": gaps,
        "shares": shares,
        "proxy_times": proxy_times,
        "gdo_times": gdo_times,
        "sweep": sweep,
        "wall": time.perf_counter() - t0,
    }


# ---------------------------------------------------------------------------
# Criterion: oracle equivalence on the five special cases


def test_oracle_equivalence_on_special_cases():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    checked = {1: 0, 2: 0, 3: 0, 4: 0, 5: 0}

    for _ in range(100):  # case 1
        n_pairs = int(rng.integers(1, 4))
        volumes = {
            s: [float(rng.integers(1, 120)) for _ in range(rng.integers(0, 4))]
            for s in range(n_pairs)
        }
        inst = instance_from_doc(single_type_doc(n_pairs, volumes))
        res, _ = solve_model1(inst, TIME_LIMIT)
        assert abs(case1_solve(inst).objective - res.objective) <= 1e-6
        checked[1] += 1

    for _ in range(100):  # case 2
        n_pairs = int(rng.integers(1, 4))
        volumes = {0: [float(rng.integers(1, 90)) for _ in range(rng.integers(1, 4))]}
        inst = instance_from_doc(
            single_type_doc(n_pairs, volumes, all_compatible=True)
        )
        res, _ = solve_model1(inst, TIME_LIMIT)
        assert abs(case2_solve(inst).objective - res.objective) <= 1e-6
        checked[2] += 1

    for case in (3, 4):
        for _ in range(100):
            doc = random_doc(
                rng, max_pairs=3, max_types=2, max_comms=4, shared_types=True
            )
            n_pairs = len(doc["sort_pairs"])
            for c in doc["commodities"]:
                if case == 3:
                    c["alternates"] = []
                    c["alt_distance"] = {}
                else:
                    primary = c["primary"]
                    c["alternates"] = [
                        f"s{j}" for j in range(n_pairs) if f"s{j}" != primary
                    ]
                    c["alt_distance"] = {a: 1.0 for a in c["alternates"]}
            inst = instance_from_doc(doc)
            res, _ = solve_model1(inst, TIME_LIMIT)
            oracle = case3_solve(inst) if case == 3 else case4_solve(inst)
            assert abs(oracle.objective - res.objective) <= 1e-6
            checked[case] += 1

    for _ in range(100):  # case 5, |S| <= 8
        n_pairs = int(rng.integers(2, 9))
        n_comms = int(rng.integers(1, 8))
        memberships = {}
        for k in range(n_comms):
            size = int(rng.integers(1, n_pairs + 1))
            memberships[k] = rng.choice(n_pairs, size=size, replace=False).tolist()
        inst = instance_from_doc(cover_doc(memberships, n_pairs))
        res, _ = solve_model1(inst, TIME_LIMIT)
        assert abs(len(case5_set_cover(inst)) - res.objective) <= 1e-6
        checked[5] += 1

    wall = time.perf_counter() - t0
    assert wall < 120.0
    report(
        "oracle-equivalence",
        f"{sum(checked.values())} instances across cases {sorted(checked)} in {wall:.1f}s",
    )


# ---------------------------------------------------------------------------
# Criterion: brute-force equivalence + minimum-distance property


def test_brute_force_equivalence_and_gdo_distance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    for trial in range(50):
        inst = instance_from_doc(random_doc(rng))
        bf = brute_force_dlpp(inst)
        res, plan = solve_model1(inst, TIME_LIMIT)
        assert abs(res.objective - bf.optimal_cost) <= 1e-9 * (1 + abs(bf.optimal_cost))
        g = solve_gdo(inst, TIME_LIMIT)
        assert g.z_star == pytest.approx(bf.optimal_cost, abs=1e-9)
        gamma = inst.reference_plan
        domain = inst.compatible_columns()

        def l1(y):
            return sum(abs(y.get(key, 0) - gamma.count(*key)) for key in domain)

        best = min(l1(y) for y in bf.optimal_counts)
        assert any(
            all(g.plan.y.get(key, 0) == y.get(key, 0) for key in domain)
            for y in bf.optimal_counts
        ), f"trial {trial}: stage-2 counts not in the optimal set"
        assert l1(g.plan.y) == best, f"trial {trial}: distance {l1(g.plan.y)} != {best}"
    wall = time.perf_counter() - t0
    assert wall < 300.0
    report("brute-force-equivalence", f"50 instances, exact cost and distance, {wall:.1f}s")


# ---------------------------------------------------------------------------
# Criterion: the T1 fixture


def test_fixture_t1_all_methods():
    t1 = instance_from_doc(t1_doc())
    res, plan = solve_model1(t1, TIME_LIMIT)
    assert res.objective == pytest.approx(150.0, abs=1e-9)
    g = solve_gdo(t1, TIME_LIMIT)
    assert g.plan.y == {(0, 0): 2, (1, 0): 1}
    assert g.hamming_distance == 1.0
    gr = greedy_solve(t1)
    validate_plan(t1, gr.plan)
    assert gr.plan.objective >= 150.0 - 1e-9
    report(
        "fixture-t1",
        f"optimum 150, goal-directed counts (2,1) at distance 1, greedy cost {gr.plan.objective:.0f}",
    )


# ---------------------------------------------------------------------------
# Criterion: value of splitting (figure-8 analog)


def test_splitting_value():
    fig8 = instance_from_doc(fig8_doc())
    primary = restrict_scenario(fig8, Scenario.PRIMARY_ONLY)
    bf_all = brute_force_dlpp(fig8)
    bf_primary = brute_force_dlpp(primary)
    res_all, _ = solve_model1(fig8, TIME_LIMIT)
    res_primary, _ = solve_model1(primary, TIME_LIMIT)
    assert res_all.objective == pytest.approx(bf_all.optimal_cost)
    assert res_primary.objective == pytest.approx(bf_primary.optimal_cost)
    assert res_all.objective < res_primary.objective
    saving = bf_primary.optimal_cost - bf_all.optimal_cost
    assert res_primary.objective - res_all.objective == pytest.approx(saving)
    assert saving == pytest.approx(5.0)  # one fewer 5-cube trailer
    report("splitting-value", f"all-alt {res_all.objective:.0f} vs primary-only {res_primary.objective:.0f}")


# ---------------------------------------------------------------------------
# Criterion: restoration guarantees


def test_restoration_guarantees():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    # The worked two-pair example: one trailer short in total, movable volume.
    two_pair = instance_from_doc(two_pair_doc())
    pred = PredictedPlan.from_counts(two_pair, {(0, 0): 1, (1, 0): 1})
    assert sum(violation_lp(two_pair, pred).z.values()) == pytest.approx(2.0)
    plan, rep = restore_detailed(two_pair, pred)
    assert sum(rep.added.values()) == 1
    validate_plan(two_pair, plan)

    count = 0
    instances = [instance_from_doc(random_doc(rng)) for _ in range(40)]
    optima = {}
    for i, inst in enumerate(instances):
        res, _ = solve_model1(inst, TIME_LIMIT)
        optima[i] = res.objective
    while count < 1000:
        i = count % len(instances)
        inst = instances[i]
        compat = inst.compatible_columns()
        if count < len(instances):
            y_hat = {}  # all-zeros prediction for the first pass
        else:
            y_hat = {key: int(rng.integers(0, 4)) for key in compat}
        plan = restore_detailed(inst, PredictedPlan.from_counts(inst, y_hat))[0]
        validate_plan(inst, plan)
        assert plan.objective >= optima[i] - 1e-9
        count += 1
    wall = time.perf_counter() - t0
    report("restoration", f"1000 randomized predictions feasible and >= optimum, {wall:.1f}s")


# ---------------------------------------------------------------------------
# Criterion: scenario monotonicity


def test_scenario_monotonicity():
    rng = np.random.default_rng(404)
    docs = [t1_doc(), fig8_doc()]
    docs += [random_doc(rng, max_pairs=3, max_types=2, max_comms=5) for _ in range(30)]
    checked = 0
    for doc in docs:
        inst = instance_from_doc(doc)
        costs = {}
        for scenario in (Scenario.PRIMARY_ONLY, Scenario.ONE_ALT, Scenario.ALL_ALT):
            res, _ = solve_model1(restrict_scenario(inst, scenario), TIME_LIMIT)
            costs[scenario] = res.objective
        assert costs[Scenario.PRIMARY_ONLY] >= costs[Scenario.ONE_ALT]
        assert costs[Scenario.ONE_ALT] >= costs[Scenario.ALL_ALT]
        checked += 1
    report("scenario-monotonicity", f"{checked} instances, exact inequalities")


# ---------------------------------------------------------------------------
# Criteria: desk-scale proxy pipeline + consistency sweep


def test_proxy_pipeline_desk_scale(desk):
    gap = shifted_geomean(desk["gaps"], 0.01)
    share = float(np.mean(desk["shares"]))
    t_proxy = shifted_geomean(desk["proxy_times"], 1.0)
    t_gdo = shifted_geomean(desk["gdo_times"], 1.0)
    assert gap <= 0.10, f"geomean gap {gap:.4f} above 10%"
    assert share >= 0.90, f"predicted-capacity share {share:.4f} below 90%"
    assert t_proxy < t_gdo, f"proxy {t_proxy:.3f}s not faster than {t_gdo:.3f}s"
    assert desk["wall"] < 1800.0, f"pipeline took {desk['wall']:.0f}s (budget 30 min)"
    report(
        "proxy-pipeline",
        f"geomean gap {gap * 100:.2f}%, capacity share {share * 100:.1f}%, "
        f"proxy {t_proxy:.3f}s vs goal-directed {t_gdo:.3f}s, total {desk['wall']:.0f}s",
    )


def test_consistency_sweep(desk):
    tv_m1 = total_variation(desk["sweep"]["m1"])
    tv_gdo = total_variation(desk["sweep"]["gdo"])
    tv_proxy = total_variation(desk["sweep"]["proxy"])
    assert tv_gdo <= 1.05 * tv_m1, f"TV goal-directed {tv_gdo:.2f} vs exact {tv_m1:.2f}"
    assert tv_proxy <= 1.05 * tv_gdo, f"TV proxy {tv_proxy:.2f} vs goal-directed {tv_gdo:.2f}"
    d_m1 = shifted_geomean(desk["sweep"]["m1_delta"], 0.01)
    d_gdo = shifted_geomean(desk["sweep"]["gdo_delta"], 0.01)
    assert d_gdo <= d_m1 + 1e-12
    report(
        "consistency-sweep",
        f"TV exact {tv_m1:.2f} >= goal-directed {tv_gdo:.2f} >= proxy {tv_proxy:.2f}; "
        f"distance geomean {d_gdo:.4f} <= {d_m1:.4f}",
    )


# ---------------------------------------------------------------------------
# Criterion: metric examples and gradient check


def test_metric_examples_and_gradient_check():
    assert normalized_distance({(0, 0): 2}, {(0, 0): 2}, [(0, 0)]) == 0.0
    assert normalized_distance({(0, 0): 3}, {(0, 0): 2}, [(0, 0)]) == pytest.approx(0.5)
    assert normalized_distance({(0, 0): 2}, {}, [(0, 0)]) == pytest.approx(2.0)
    assert total_variation([np.array([2.0, 1.0]), np.array([3.0, 1.0])]) == pytest.approx(1.0)
    assert total_variation(
        [np.array([0.0, 0.0]), np.array([3.0, 4.0]), np.array([3.0, 4.0])]
    ) == pytest.approx(5.0)
    assert shifted_geomean([5.0, 5.0], 0.01) == pytest.approx(5.0)
    assert shifted_geomean([0.0, 0.0], 0.01) == pytest.approx(0.0)
    assert shifted_geomean([1.0, 100.0], 1.0) == pytest.approx(13.21, abs=0.005)

    from loadplan.proxy import _init_model, _loss_and_grads

    rng = np.random.default_rng(7)
    cfg = TrainingConfig(seed=7, hidden_layers=2, hidden_dim=5, dropout=0.0)
    model = _init_model(cfg, 3, np.ones(4), {}, np.zeros(3), np.ones(3), rng)
    xb = rng.normal(size=(5, 3))
    yb = np.abs(rng.normal(size=(5, 4)))
    _, gw, _, _, _ = _loss_and_grads(model, xb, yb, None)
    eps = 1e-6
    worst = 0.0
    for li, w in enumerate(model.weights):
        flat = w.ravel()
        for i in rng.choice(flat.size, size=min(10, flat.size), replace=False):
            old = flat[i]
            flat[i] = old + eps
            up = _loss_and_grads(model, xb, yb, None)[0]
            flat[i] = old - eps
            dn = _loss_and_grads(model, xb, yb, None)[0]
            flat[i] = old
            fd = (up - dn) / (2 * eps)
            an = gw[li].ravel()[i]
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-8))
    assert worst < 1e-4
    report("metrics-and-gradient", f"all examples exact, gradient error {worst:.2e}")


# ---------------------------------------------------------------------------
# Criterion: determinism of solve / datagen / train artifacts


def test_artifact_determinism(tmp_path):
    from loadplan.cli import main

    t1_path = tmp_path / "t1.json"
    t1_path.write_text(json.dumps(t1_doc()))

    plans = []
    for name in ("a", "b"):
        out = tmp_path / f"plan_{name}.json"
        assert main(["solve", "--mode", "gdo", "--instance", str(t1_path), "--out", str(out)]) == 0
        plans.append(out.read_bytes())
    assert plans[0] == plans[1]

    digests = []
    for name in ("d1", "d2"):
        out_dir = tmp_path / name
        assert main(
            ["datagen", "--ref", str(t1_path), "--n", "4", "--seed", "2", "--out-dir", str(out_dir)]
        ) == 0
        digest = {
            f: (out_dir / f).read_bytes() for f in sorted(os.listdir(out_dir))
        }
        digests.append(digest)
    assert digests[0] == digests[1]

    models = []
    for name in ("m1", "m2"):
        out = tmp_path / f"{name}.json"
        assert main(
            [
                "train", "--data", str(tmp_path / "d1"), "--grid", "single",
                "--seed", "5", "--epochs", "20", "--out-model", str(out),
            ]
        ) == 0
        models.append(out.read_bytes())
    assert models[0] == models[1]
    report("determinism", "solve, datagen, train artifacts byte-identical across reruns")
