"""What-if HTTP service for the planner console.

Instances and solutions are content-addressed files under a store directory:
the same instance, mode, seed, and limit always map to the same solution id,
so every request is idempotent and repeated solves are served from the store.
Solver work runs behind a bounded slot count; requests beyond the budget get
409 rather than queueing unboundedly.

Endpoints are versioned under /v1; the OpenAPI description is served by the
framework at /openapi.json.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from loadplan.formulations import (
    hamming_to_reference,
    plan_from_doc,
    plan_to_doc,
    solve_gdo,
    solve_model1,
)
from loadplan.greedy import greedy_solve
from loadplan.metrics import normalized_distance
from loadplan.network import (
    Instance,
    ParseError,
    ValidationError,
    instance_to_doc,
    load_instance,
    parse_instance,
)
from loadplan.proxy import ProxyModel, instance_signature, load_model, proxy_solve

API_VERSION = "v1"


def _canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


class SolveBody(BaseModel):
    mode: str = Field(pattern="^(mip|gdo|greedy|proxy)$")
    time_limit_s: float = Field(default=30.0, gt=0.0, le=3600.0)
    seed: int = 0


class WhatIfBody(BaseModel):
    global_scale: float = Field(default=1.0, ge=0.0, le=10.0)
    per_commodity_overrides: dict[str, float] = Field(default_factory=dict)
    time_limit_s: float = Field(default=30.0, gt=0.0, le=3600.0)
    seed: int = 0


class ApiError(Exception):
    def __init__(self, status_code: int, message: str):
        self.status_code = status_code
        self.message = message
        super().__init__(message)


class Store:
    """File-backed instance/solution store with an in-process index."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(os.path.join(root, "instances"), exist_ok=True)
        os.makedirs(os.path.join(root, "solutions"), exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, kind: str, key: str) -> str:
        return os.path.join(self.root, kind, f"{key}.json")

    def put(self, kind: str, key: str, doc: dict) -> None:
        path = self._path(kind, key)
        with self._lock:
            if not os.path.exists(path):
                tmp = path + ".tmp"
                with open(tmp, "w", encoding="utf-8") as fh:
                    json.dump(doc, fh, indent=2)
                os.replace(tmp, path)

    def get(self, kind: str, key: str) -> Optional[dict]:
        path = self._path(kind, key)
        if not os.path.exists(path):
            return None
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)


def _instance_metrics(inst: Instance, plan) -> dict:
    domain = inst.compatible_columns()
    metrics = {
        "cost": plan.objective,
        "total_volume": inst.total_volume(),
        "trailer_count": int(sum(plan.y.values())),
    }
    if inst.reference_plan is not None:
        gamma = inst.reference_plan
        metrics["hamming_to_reference"] = hamming_to_reference(plan, gamma, domain)
        metrics["normalized_distance"] = normalized_distance(plan.y, gamma.gamma, domain)
        metrics["reference"] = [
            {
                "sort_pair": inst.sort_pairs[s].name,
                "trailer_type": inst.trailer_types[v].name,
                "count": gamma.count(s, v),
            }
            for (s, v) in domain
        ]
    return metrics


def create_app(
    store_dir: str,
    model_path: Optional[str] = None,
    solver_slots: int = 2,
) -> FastAPI:
    app = FastAPI(title="loadplan what-if service", version=API_VERSION)
    store = Store(store_dir)
    slots = threading.Semaphore(solver_slots)
    models: dict[str, ProxyModel] = {}
    if model_path:
        model = load_model(model_path)
        models[_digest(_canonical(model.signature))] = model
    app.state.store = store
    app.state.solver_slots = slots
    app.state.models = models

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status_code, content={"error": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        fields = [
            {"path": ".".join(str(p) for p in err["loc"]), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(
            status_code=400, content={"error": "schema violation", "fields": fields}
        )

    def load_stored_instance(instance_id: str) -> Instance:
        doc = store.get("instances", instance_id)
        if doc is None:
            raise ApiError(404, f"unknown instance {instance_id}")
        return parse_instance(doc)

    def model_for(inst: Instance) -> ProxyModel:
        key = _digest(_canonical(instance_signature(inst)))
        model = models.get(key)
        if model is None:
            raise ApiError(
                422, "no proxy model registered for this instance's structure"
            )
        return model

    def run_solve(inst: Instance, instance_id: str, body: SolveBody) -> tuple[str, dict]:
        solve_key = _digest(
            _canonical(
                {
                    "instance": instance_id,
                    "mode": body.mode,
                    "time_limit_s": body.time_limit_s,
                    "seed": body.seed,
                }
            )
        )
        cached = store.get("solutions", solve_key)
        if cached is not None:
            return solve_key, cached
        if not slots.acquire(blocking=False):
            raise ApiError(409, "solver busy beyond concurrency budget")
        try:
            t0 = time.perf_counter()
            restoration = None
            timings = {}
            if body.mode == "mip":
                _, plan = solve_model1(inst, body.time_limit_s)
            elif body.mode == "gdo":
                if inst.reference_plan is None:
                    raise ApiError(422, "gdo requires a reference plan on the instance")
                plan = solve_gdo(inst, body.time_limit_s).plan
            elif body.mode == "greedy":
                plan = greedy_solve(inst).plan
            else:
                model = model_for(inst)
                plan, report, timings = proxy_solve(model, inst, body.time_limit_s)
                restoration = report.to_doc(inst)
            timings = dict(timings)
            timings["total_s"] = time.perf_counter() - t0
            doc = {
                "id": solve_key,
                "instance_id": instance_id,
                "mode": body.mode,
                "seed": body.seed,
                "plan": plan_to_doc(inst, plan),
                "metrics": _instance_metrics(inst, plan),
                "restoration": restoration,
                "timings": timings,
            }
            store.put("solutions", solve_key, doc)
            return solve_key, doc
        finally:
            slots.release()

    @app.post(f"/{API_VERSION}/instances")
    async def upload_instance(request: Request):
        raw = await request.body()
        try:
            inst = load_instance(raw)
        except ParseError as exc:
            raise ApiError(400, str(exc))
        except ValidationError as exc:
            raise ApiError(400, f"{exc.path}: {exc.message}")
        doc = instance_to_doc(inst)
        instance_id = _digest(_canonical(doc))
        store.put("instances", instance_id, doc)
        return {"id": instance_id}

    @app.get(f"/{API_VERSION}/instances/{{instance_id}}")
    async def get_instance(instance_id: str):
        doc = store.get("instances", instance_id)
        if doc is None:
            raise ApiError(404, f"unknown instance {instance_id}")
        return doc

    @app.post(f"/{API_VERSION}/instances/{{instance_id}}/solve")
    async def solve_instance(instance_id: str, body: SolveBody):
        inst = load_stored_instance(instance_id)
        solution_id, doc = run_solve(inst, instance_id, body)
        return {"solution_id": solution_id, "solution": doc}

    @app.get(f"/{API_VERSION}/solutions/{{solution_id}}")
    async def get_solution(solution_id: str):
        doc = store.get("solutions", solution_id)
        if doc is None:
            raise ApiError(404, f"unknown solution {solution_id}")
        return doc

    @app.post(f"/{API_VERSION}/instances/{{instance_id}}/whatif")
    async def whatif(instance_id: str, body: WhatIfBody):
        base_doc = store.get("instances", instance_id)
        if base_doc is None:
            raise ApiError(404, f"unknown instance {instance_id}")
        known = {c["id"] for c in base_doc["commodities"]}
        unknown = set(body.per_commodity_overrides) - known
        if unknown:
            raise ApiError(
                422, f"overrides name unknown commodities: {sorted(unknown)}"
            )
        derived = json.loads(json.dumps(base_doc))
        for c in derived["commodities"]:
            volume = c["volume"] * body.global_scale
            if c["id"] in body.per_commodity_overrides:
                volume = body.per_commodity_overrides[c["id"]]
            if volume < 0:
                raise ApiError(422, f"negative volume for commodity {c['id']}")
            c["volume"] = volume
        try:
            inst = parse_instance(derived)
        except ValidationError as exc:
            raise ApiError(422, f"{exc.path}: {exc.message}")
        derived_id = _digest(_canonical(instance_to_doc(inst)))
        store.put("instances", derived_id, instance_to_doc(inst))
        solution_id, doc = run_solve(
            inst,
            derived_id,
            SolveBody(mode="proxy", time_limit_s=body.time_limit_s, seed=body.seed),
        )
        return {
            "derived_instance_id": derived_id,
            "solution_id": solution_id,
            "solution": doc,
        }

    @app.get(f"/{API_VERSION}/compare")
    async def compare(a: str, b: str):
        doc_a = store.get("solutions", a)
        doc_b = store.get("solutions", b)
        if doc_a is None or doc_b is None:
            missing = a if doc_a is None else b
            raise ApiError(404, f"unknown solution {missing}")
        inst_a = load_stored_instance(doc_a["instance_id"])
        inst_b = load_stored_instance(doc_b["instance_id"])
        if instance_signature(inst_a) != instance_signature(inst_b):
            raise ApiError(
                422, "solutions belong to structurally different instances"
            )
        plan_a = plan_from_doc(inst_a, doc_a["plan"])
        plan_b = plan_from_doc(inst_a, doc_b["plan"])
        domain = inst_a.compatible_columns()
        va = plan_a.count_vector(domain)
        vb = plan_b.count_vector(domain)
        tv_step = float(np.linalg.norm(va - vb))
        delta = normalized_distance(plan_a.y, dict(plan_b.y), domain)
        return {
            "a": a,
            "b": b,
            "delta": delta,
            "tv_step": tv_step,
            "cost_delta": plan_a.objective - plan_b.objective,
        }

    @app.post(f"/{API_VERSION}/models")
    async def upload_model(request: Request):
        raw = await request.body()
        import tempfile

        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            fh.write(raw.decode("utf-8"))
            tmp = fh.name
        try:
            model = load_model(tmp)
        except (ValueError, KeyError) as exc:
            raise ApiError(400, f"bad checkpoint: {exc}")
        finally:
            os.unlink(tmp)
        key = _digest(_canonical(model.signature))
        models[key] = model
        return {"signature_key": key}

    return app
