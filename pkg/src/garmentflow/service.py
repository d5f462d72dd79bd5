"""HTTP job service for the editing studio and other clients.

Generation and editing run as polled jobs; pattern recovery answers
synchronously. Request and response bodies use the package's JSON formats
throughout. The health endpoint never waits on job workers.
"""

import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, PlainTextResponse

from . import storage
from .dps import DpsDivergenceError, dps_sample
from .flow import FlowModel, sample
from .jobs import JobManager, QueueFullError
from .pattern_models import PatternModelBase
from .recovery import infer_stitches, recover_delaunay


class ServiceConfig:
    """Key-value config: model paths, storage root, queue bound, defaults."""

    def __init__(self, data: dict = None):
        data = data or {}
        self.data_dir = Path(data.get("data_dir", storage.data_dir()))
        self.model_path = data.get("model")
        self.pattern_flow_path = data.get("pattern_flow")
        self.pattern_regression_path = data.get("pattern_regression")
        self.queue_limit = int(data.get("queue_limit", 4))
        self.default_steps = int(data.get("default_steps", 100))

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        return cls(json.loads(Path(path).read_text()))


def create_app(config: ServiceConfig = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="garmentflow service")
    manager = JobManager(config.data_dir / "jobs", queue_limit=config.queue_limit)

    models: dict[str, object] = {}
    if config.model_path:
        models["flow"] = FlowModel.load(config.model_path)
    for key, path in (("pattern_flow", config.pattern_flow_path),
                      ("pattern_regression", config.pattern_regression_path)):
        if path:
            models[key] = PatternModelBase.load(path)

    def flow_model() -> FlowModel:
        if "flow" not in models:
            raise HTTPException(status_code=409, detail="model not loaded")
        return models["flow"]

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/models")
    def list_models():
        out = {}
        for name, model in models.items():
            out[name] = {
                "kind": getattr(model, "kind", "flow"),
                "params": model.param_count(),
            }
        return out

    @app.get("/datasets")
    def list_datasets():
        root = config.data_dir / "datasets"
        if not root.exists():
            return []
        found = []
        for manifest in sorted(root.glob("*/manifest.json")):
            data = json.loads(manifest.read_text())
            found.append({
                "name": manifest.parent.name,
                "n_garments": data.get("n_garments"),
                "kept": sum(1 for r in data.get("samples", []) if not r.get("filtered")),
            })
        return found

    @app.post("/generate")
    def generate(body: dict):
        model = flow_model()
        try:
            n = int(body["n"])
            steps = int(body.get("steps", config.default_steps))
            seed = int(body.get("seed", 0))
            cond = body.get("cond")
            cond_arr = np.asarray(cond, dtype=np.int64) if cond is not None else None
            if not 1 <= n <= model.config.n_max:
                raise ValueError(f"n must lie in [1, {model.config.n_max}]")
        except (KeyError, ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

        def run(job):
            particles = sample(model, n, cond=cond_arr, steps=steps, seed=seed,
                               progress=job.set_progress)
            return {"result": particles.to_json_dict(), "trace": []}

        try:
            job = manager.submit("generate", body, run)
        except QueueFullError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        return job.to_json_dict()

    @app.post("/edit")
    def edit(body: dict):
        model = flow_model()
        try:
            request = storage.edit_request_from_json(body, base_dir=config.data_dir)
        except (KeyError, ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

        def run(job):
            try:
                particles, trace = dps_sample(model, request,
                                              progress=job.set_progress)
            except DpsDivergenceError as exc:
                # Persist the partial trace before failing the job.
                manager._persist(job, "trace", exc.trace)
                raise
            return {"result": particles.to_json_dict(), "trace": trace}

        try:
            job = manager.submit("edit", body, run)
        except QueueFullError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        return job.to_json_dict()

    @app.post("/recover")
    def recover(body: dict):
        try:
            particles = storage.GarmentParticles.from_json_dict(body["particles"])
            variant = body.get("variant", "delaunay")
        except (KeyError, ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if variant == "delaunay":
            try:
                pattern = recover_delaunay(particles)
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            pattern.stitches = infer_stitches(pattern, particles)
        elif variant in ("flow", "regression"):
            key = "pattern_flow" if variant == "flow" else "pattern_regression"
            if key not in models:
                raise HTTPException(status_code=409, detail=f"{key} model not loaded")
            pattern = models[key].recover(particles, seed=int(body.get("seed", 0)))
        else:
            raise HTTPException(status_code=400, detail=f"unknown variant {variant!r}")
        return pattern.to_json_dict()

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = manager.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return job.to_json_dict()

    @app.get("/jobs/{job_id}/result")
    def job_result(job_id: str):
        job = manager.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        path = manager.artifact_path(job_id, "result")
        if job.status != "done" or not path.exists():
            raise HTTPException(status_code=404, detail=f"job is {job.status}")
        return JSONResponse(content=json.loads(path.read_text()))

    @app.get("/jobs/{job_id}/trace")
    def job_trace(job_id: str):
        job = manager.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        path = manager.artifact_path(job_id, "trace")
        if not path.exists():
            raise HTTPException(status_code=404, detail="no trace recorded")
        return PlainTextResponse(content=path.read_text(),
                                 media_type="application/jsonl")

    app.state.manager = manager
    app.state.models = models
    app.state.config = config
    return app
