"""Perturbed-instance generation and goal-directed labeling.

Volumes are perturbed multiplicatively: one global scale drawn uniformly from
[0.8, 1.2] and per-commodity noise drawn from Normal(1, 0.05), clamped at
zero. Randomness comes from counter-based Philox streams: instance ``i``
always uses stream block ``i`` of the run seed, so any single instance is
reproducible independently of batch size or parallelism.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from loadplan.formulations import solve_gdo
from loadplan.mip import NoIncumbentError
from loadplan.network import Instance, ReferencePlan, load_instance, save_instance
from loadplan.proxy import (
    TrainingData,
    compatibility_mask,
    counts_vector,
    instance_signature,
    volumes_vector,
)

GLOBAL_SCALE_RANGE = (0.8, 1.2)
NOISE_STD = 0.05
SPLIT_FRACTIONS = (0.8, 0.1, 0.1)

#: Philox blocks reserved per instance stream (draws per instance << 2**64).
_STREAM_BLOCK = 2**192
#: Stream index reserved for the train/val/test shuffle.
_SPLIT_STREAM = 2**63


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one instance stream of a run seed."""
    return np.random.Generator(
        np.random.Philox(key=seed, counter=stream * _STREAM_BLOCK)
    )


def draw_perturbation(rng: np.random.Generator, n: int) -> tuple[float, np.ndarray]:
    """One (global scale, per-commodity noise) draw."""
    scale = rng.uniform(*GLOBAL_SCALE_RANGE)
    noise = rng.normal(1.0, NOISE_STD, size=n)
    return float(scale), noise


def perturb(ref: Instance, seed: int, stream: int = 0) -> Instance:
    """One perturbed copy of the reference: global scale times per-commodity
    noise, volumes clamped at zero; structure and reference plan unchanged."""
    rng = stream_rng(seed, stream)
    scale, noise = draw_perturbation(rng, len(ref.commodities))
    comms = tuple(
        replace(k, volume=float(max(scale * noise[i] * k.volume, 0.0)))
        for i, k in enumerate(ref.commodities)
    )
    return replace(ref, commodities=comms)


def scale_volumes(ref: Instance, factor: float) -> Instance:
    comms = tuple(replace(k, volume=float(k.volume * factor)) for k in ref.commodities)
    return replace(ref, commodities=comms)


def generate_sweep(
    ref: Instance, steps: int, scale_from: float = 0.8, scale_to: float = 1.2
) -> list[tuple[float, Instance]]:
    """Instances scaled along [scale_from, scale_to], ordered by nondecreasing
    total volume (the contract of the total-variation metric)."""
    factors = np.linspace(scale_from, scale_to, steps)
    out = [(float(f), scale_volumes(ref, float(f))) for f in factors]
    out.sort(key=lambda pair: pair[1].total_volume())
    return out


@dataclass
class LabeledInstance:
    index: int
    instance: Instance
    label_y: Optional[dict[tuple[int, int], int]]
    failed: bool = False
    note: str = ""


@dataclass
class GeneratedDataset:
    reference: Instance
    items: list[LabeledInstance]
    splits: dict[str, list[int]]
    seed: int

    @property
    def n_failed(self) -> int:
        return sum(1 for it in self.items if it.failed)

    def to_training_data(self) -> TrainingData:
        """Flat arrays over the successfully labeled items; failed labels are
        dropped from their splits."""
        ok = [it for it in self.items if not it.failed]
        pos = {it.index: i for i, it in enumerate(ok)}
        inputs = np.array([volumes_vector(it.instance) for it in ok])
        targets = np.array(
            [counts_vector(it.instance, it.label_y) for it in ok]
        )
        return TrainingData(
            inputs=inputs,
            targets=targets,
            mask=compatibility_mask(self.reference),
            signature=instance_signature(self.reference),
            train_idx=np.array([pos[i] for i in self.splits["train"] if i in pos], dtype=np.int64),
            val_idx=np.array([pos[i] for i in self.splits["val"] if i in pos], dtype=np.int64),
            test_idx=np.array([pos[i] for i in self.splits["test"] if i in pos], dtype=np.int64),
        )

    def instances_of_split(self, split: str) -> list[LabeledInstance]:
        wanted = set(self.splits[split])
        return [it for it in self.items if it.index in wanted and not it.failed]


def split_indices(n: int, seed: int) -> dict[str, list[int]]:
    """Deterministic shuffle split (train/val/test fractions 0.8/0.1/0.1)."""
    rng = stream_rng(seed, _SPLIT_STREAM)
    order = rng.permutation(n)
    n_train = int(SPLIT_FRACTIONS[0] * n)
    n_val = int(SPLIT_FRACTIONS[1] * n)
    return {
        "train": sorted(int(i) for i in order[:n_train]),
        "val": sorted(int(i) for i in order[n_train : n_train + n_val]),
        "test": sorted(int(i) for i in order[n_train + n_val :]),
    }


def label_instance(inst: Instance, stage_time_limit: float) -> dict[tuple[int, int], int]:
    from loadplan.formulations import validate_plan

    result = solve_gdo(inst, stage_time_limit)
    validate_plan(inst, result.plan)  # no invalid label may enter the dataset
    return dict(result.plan.y)


def _label_one(args) -> LabeledInstance:
    ref, seed, index, stage_time_limit = args
    inst = perturb(ref, seed, stream=index)
    try:
        label = label_instance(inst, stage_time_limit)
        return LabeledInstance(index, inst, label)
    except (NoIncumbentError, RuntimeError, ValueError) as exc:
        return LabeledInstance(index, inst, None, failed=True, note=str(exc))


def generate_dataset(
    ref: Instance,
    n: int,
    seed: int,
    stage_time_limit: float = 10.0,
    progress: Optional[callable] = None,
    jobs: int = 1,
) -> GeneratedDataset:
    """Generate ``n`` perturbed instances with goal-directed labels. Labeling
    failures are flagged and excluded, never fatal. ``jobs > 1`` labels in
    parallel processes; per-index RNG streams keep the output identical to a
    sequential run, merged in index order."""
    if ref.reference_plan is None:
        raise ValueError("labeling requires a reference plan on the instance")
    work = [(ref, seed, i, stage_time_limit) for i in range(n)]
    items: list[LabeledInstance] = []
    if jobs > 1 and n > 1:
        import multiprocessing

        with multiprocessing.Pool(processes=jobs) as pool:
            for item in pool.imap(_label_one, work):
                items.append(item)
                if progress is not None:
                    progress(len(items), n)
    else:
        for args in work:
            items.append(_label_one(args))
            if progress is not None:
                progress(len(items), n)
    items.sort(key=lambda it: it.index)
    return GeneratedDataset(
        reference=ref, items=items, splits=split_indices(n, seed), seed=seed
    )


# ---------------------------------------------------------------------------
# Disk format: one instance JSON per item plus a manifest.


def save_dataset(ds: GeneratedDataset, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "reference.json"), "w", encoding="utf-8") as fh:
        fh.write(save_instance(ds.reference))
    split_of = {}
    for name, idxs in ds.splits.items():
        for i in idxs:
            split_of[i] = name
    manifest = {"seed": ds.seed, "n": len(ds.items), "items": []}
    for it in ds.items:
        fname = f"instance_{it.index:05d}.json"
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8") as fh:
            fh.write(save_instance(it.instance))
        label = None
        if it.label_y is not None:
            label = [
                {
                    "sort_pair": ds.reference.sort_pairs[s].name,
                    "trailer_type": ds.reference.trailer_types[v].name,
                    "count": c,
                }
                for (s, v), c in sorted(it.label_y.items())
            ]
        manifest["items"].append(
            {
                "index": it.index,
                "file": fname,
                "split": split_of.get(it.index, "train"),
                "failed": it.failed,
                "note": it.note,
                "label": label,
            }
        )
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def load_dataset(out_dir: str) -> GeneratedDataset:
    with open(os.path.join(out_dir, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    with open(os.path.join(out_dir, "reference.json"), "rb") as fh:
        ref = load_instance(fh)
    pair_idx = {p.name: p.index for p in ref.sort_pairs}
    type_idx = {t.name: t.index for t in ref.trailer_types}
    items = []
    splits: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    for entry in manifest["items"]:
        with open(os.path.join(out_dir, entry["file"]), "rb") as fh:
            inst = load_instance(fh)
        label = None
        if entry["label"] is not None:
            label = {
                (pair_idx[e["sort_pair"]], type_idx[e["trailer_type"]]): int(e["count"])
                for e in entry["label"]
            }
        items.append(
            LabeledInstance(
                index=entry["index"],
                instance=inst,
                label_y=label,
                failed=entry["failed"],
                note=entry.get("note", ""),
            )
        )
        splits[entry["split"]].append(entry["index"])
    return GeneratedDataset(
        reference=ref, items=items, splits=splits, seed=manifest["seed"]
    )


# ---------------------------------------------------------------------------
# Synthetic terminal family for demos and desk-scale evaluation.


def make_synthetic_terminal(
    seed: int,
    n_pairs: int = 10,
    n_commodities: int = 50,
    reference_time_limit: float = 30.0,
) -> Instance:
    """A small terminal with two trailer types, mixed compatibility, and a
    reference plan produced by the greedy baseline (standing in for the
    planners' existing plan)."""
    from loadplan.greedy import greedy_solve  # deferred: greedy sits above datagen

    rng = stream_rng(seed, 2**62)
    sorts = ["Day", "Twilight", "Night", "Sunrise"]
    doc: dict = {
        "sort_pairs": [],
        "trailer_types": [
            {"id": "v50", "capacity": 50.0, "cost": 50.0},
            {"id": "v25", "capacity": 25.0, "cost": 25.0},
        ],
        "commodities": [],
        "reference_plan": None,
    }
    for i in range(n_pairs):
        allowed = ["v50"] if i % 3 else ["v50", "v25"]
        doc["sort_pairs"].append(
            {
                "id": f"s{i:02d}",
                "origin": {"terminal": "HUB", "sort": sorts[i % 4], "day": 1 + i // 4},
                "destination": {
                    "terminal": f"D{i:02d}",
                    "sort": sorts[(i + 2) % 4],
                    "day": 2 + i // 4,
                },
                "allowed_trailers": allowed,
                "load_pair": None,
            }
        )
    classes = ["OneDay", "TwoDay", "ThreeDay", "Other"]
    for j in range(n_commodities):
        primary = j % n_pairs
        alternates = []
        dists = {}
        n_alts = int(rng.integers(0, 3))
        for a in range(1, n_alts + 1):
            alt = (primary + a) % n_pairs
            alternates.append(f"s{alt:02d}")
            dists[f"s{alt:02d}"] = round(float(rng.uniform(5.0, 60.0)), 1)
        doc["commodities"].append(
            {
                "id": f"k{j:03d}",
                "volume": round(float(rng.gamma(2.0, 6.0)), 3),
                "service_class": classes[j % 4],
                "primary": f"s{primary:02d}",
                "alternates": alternates,
                "alt_distance": dists,
            }
        )
    bare = load_instance(json.dumps(doc))
    greedy = greedy_solve(bare)
    gamma = {key: n for key, n in greedy.plan.y.items() if n > 0}
    return replace(bare, reference_plan=ReferencePlan(gamma=gamma))
