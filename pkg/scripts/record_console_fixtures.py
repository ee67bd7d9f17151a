"""Record real service responses as fixtures for the console's tests.

Trains a small model for the T1 instance, runs the service in-process, and
snapshots the responses the console renders: base solve, identity what-if, a
scaled what-if, comparisons, and a 20-step sweep. Everything is seeded, so
re-recording produces identical files.

Usage: python scripts/record_console_fixtures.py [out_dir]
"""

import json
import pathlib
import sys
import tempfile

from fastapi.testclient import TestClient

from loadplan.datagen import generate_dataset
from loadplan.network import load_instance
from loadplan.proxy import TrainingConfig, save_model, train_single
from loadplan.service import create_app

T1 = {
    "sort_pairs": [
        {
            "id": "s1",
            "origin": {"terminal": "T", "sort": "Day", "day": 1},
            "destination": {"terminal": "A", "sort": "Night", "day": 1},
            "allowed_trailers": ["v50"],
            "load_pair": None,
        },
        {
            "id": "s2",
            "origin": {"terminal": "T", "sort": "Twilight", "day": 1},
            "destination": {"terminal": "B", "sort": "Sunrise", "day": 2},
            "allowed_trailers": ["v50"],
            "load_pair": None,
        },
    ],
    "trailer_types": [{"id": "v50", "capacity": 50.0, "cost": 50.0}],
    "commodities": [
        {
            "id": "k1",
            "volume": 60.0,
            "service_class": "TwoDay",
            "primary": "s1",
            "alternates": [],
            "alt_distance": {},
        },
        {
            "id": "k2",
            "volume": 30.0,
            "service_class": "TwoDay",
            "primary": "s1",
            "alternates": ["s2"],
            "alt_distance": {"s2": 25.0},
        },
        {
            "id": "k3",
            "volume": 40.0,
            "service_class": "OneDay",
            "primary": "s2",
            "alternates": [],
            "alt_distance": {},
        },
    ],
    "reference_plan": [
        {"sort_pair": "s1", "trailer_type": "v50", "count": 2},
        {"sort_pair": "s2", "trailer_type": "v50", "count": 2},
    ],
}

SWEEP_STEPS = 20
TIME_LIMIT = 20.0


def scrub(doc):
    """Wall-clock timings vary run to run; zero them so fixtures are stable."""
    if isinstance(doc, dict):
        return {
            k: ({t: 0.0 for t in v} if k == "timings" and isinstance(v, dict) else scrub(v))
            for k, v in doc.items()
        }
    if isinstance(doc, list):
        return [scrub(v) for v in doc]
    return doc


def main() -> int:
    out_dir = pathlib.Path(
        sys.argv[1] if len(sys.argv) > 1 else "frontend/test/fixtures"
    )
    out_dir.mkdir(parents=True, exist_ok=True)

    inst = load_instance(json.dumps(T1))
    ds = generate_dataset(inst, n=24, seed=6, stage_time_limit=10)
    model, _ = train_single(
        ds.to_training_data(),
        TrainingConfig(seed=3, epochs=200, hidden_layers=2, hidden_dim=16, dropout=0.0),
    )

    with tempfile.TemporaryDirectory() as tmp:
        model_path = pathlib.Path(tmp) / "model.json"
        save_model(model, model_path)
        app = create_app(store_dir=str(pathlib.Path(tmp) / "store"),
                         model_path=str(model_path), solver_slots=2)
        client = TestClient(app)

        def dump(name, doc):
            path = out_dir / f"{name}.json"
            path.write_text(json.dumps(scrub(doc), indent=2, sort_keys=True) + "\n")
            print(f"wrote {path}")

        upload = client.post("/v1/instances", content=json.dumps(T1)).json()
        iid = upload["id"]
        dump("upload", upload)
        dump("instance", client.get(f"/v1/instances/{iid}").json())

        base = client.post(
            f"/v1/instances/{iid}/solve",
            json={"mode": "proxy", "time_limit_s": TIME_LIMIT},
        ).json()
        dump("base_solve", base)

        identity = client.post(
            f"/v1/instances/{iid}/whatif",
            json={"global_scale": 1.0, "time_limit_s": TIME_LIMIT},
        ).json()
        dump("whatif_identity", identity)

        scaled = client.post(
            f"/v1/instances/{iid}/whatif",
            json={
                "global_scale": 1.1,
                "per_commodity_overrides": {"k3": 55.0},
                "time_limit_s": TIME_LIMIT,
            },
        ).json()
        dump("whatif_scaled", scaled)

        dump(
            "compare_self",
            client.get(
                "/v1/compare",
                params={"a": base["solution_id"], "b": base["solution_id"]},
            ).json(),
        )
        dump(
            "compare_scaled",
            client.get(
                "/v1/compare",
                params={"a": scaled["solution_id"], "b": base["solution_id"]},
            ).json(),
        )

        sweep = []
        for i in range(SWEEP_STEPS):
            scale = 0.8 + (1.2 - 0.8) * i / (SWEEP_STEPS - 1)
            sweep.append(
                client.post(
                    f"/v1/instances/{iid}/whatif",
                    json={"global_scale": scale, "time_limit_s": TIME_LIMIT},
                ).json()
            )
        dump("sweep", sweep)
    return 0


if __name__ == "__main__":
    sys.exit(main())
