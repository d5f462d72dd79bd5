"""File formats: particles, point sets, patterns, datasets, edit requests.

Everything is JSON on disk. Particle files carry {"points": [[u,v,x,y,z]],
"flags": [...]}; bare point sets carry {"dim": 2|3, "points": [...]};
patterns mirror the tensor layout; edit requests bundle a task, an inline
observation or a file reference, an optional camera, and the guidance
hyperparameters.
"""

import json
import os
from pathlib import Path

import numpy as np

from .dps import DpsConfig, EditRequest
from .particles import Camera, GarmentParticles
from .patterns import SewingPattern

DATA_DIR_ENV = "GP_DATA_DIR"


def data_dir() -> Path:
    root = os.environ.get(DATA_DIR_ENV)
    return Path(root) if root else Path.cwd() / "gp_data"


def save_particles(path, particles: GarmentParticles):
    Path(path).write_text(json.dumps(particles.to_json_dict()))


def load_particles(path) -> GarmentParticles:
    return GarmentParticles.from_json_dict(json.loads(Path(path).read_text()))


def save_point_set(path, points: np.ndarray):
    points = np.asarray(points, dtype=np.float64)
    Path(path).write_text(json.dumps({"dim": points.shape[1], "points": points.tolist()}))


def load_point_set(path) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    points = np.asarray(data["points"], dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != data["dim"]:
        raise ValueError(f"point set file {path} is inconsistent")
    return points


def save_pattern(path, pattern: SewingPattern):
    Path(path).write_text(json.dumps(pattern.to_json_dict()))


def load_pattern(path) -> SewingPattern:
    return SewingPattern.from_json_dict(json.loads(Path(path).read_text()))


def camera_from_json(data) -> Camera:
    """Accepts a 3x2 matrix, or {"preset": name, "azimuth_deg": ...}."""
    if isinstance(data, dict):
        return Camera.preset(data["preset"], azimuth_deg=data.get("azimuth_deg", 0.0))
    return Camera(np.asarray(data, dtype=np.float64))


def camera_to_json(camera: Camera):
    return camera.matrix.tolist()


def edit_request_from_json(data: dict, base_dir=None) -> EditRequest:
    """Parse an edit request; observation is inline or an external file ref."""
    if "observation" in data:
        obs_block = data["observation"]
        obs = np.asarray(obs_block["points"], dtype=np.float64)
    elif "observation_file" in data:
        path = Path(data["observation_file"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        obs = load_point_set(path)
    else:
        raise ValueError("edit request needs 'observation' or 'observation_file'")
    camera = camera_from_json(data["camera"]) if data.get("camera") is not None else None
    cond = np.asarray(data["cond"], dtype=np.int64) if data.get("cond") is not None else None
    hyper = data.get("hyper", {})
    config = DpsConfig(
        steps=int(hyper.get("steps", 500)),
        stop_t=float(hyper.get("stop_t", 0.6)),
        eta=hyper.get("eta"),
        opt_n=hyper.get("opt_n"),
        n_points=hyper.get("n_points"),
        seed=int(hyper.get("seed", 0)),
    )
    if config.eta is not None:
        config.eta = float(config.eta)
    if config.opt_n is not None:
        config.opt_n = int(config.opt_n)
    if config.n_points is not None:
        config.n_points = int(config.n_points)
    return EditRequest(
        task=data["task"], observation=obs, camera=camera, cond=cond, config=config)


def edit_request_to_json(request: EditRequest) -> dict:
    cfg = request.config
    return {
        "task": request.task,
        "observation": {
            "dim": request.observation.shape[1],
            "points": request.observation.tolist(),
        },
        "camera": camera_to_json(request.camera) if request.camera else None,
        "cond": request.cond.tolist() if request.cond is not None else None,
        "hyper": {
            "steps": cfg.steps,
            "stop_t": cfg.stop_t,
            "eta": cfg.eta,
            "opt_n": cfg.opt_n,
            "n_points": cfg.n_points,
            "seed": cfg.seed,
        },
    }


def load_dataset(dataset_dir):
    """Yield (particles, pattern, meta) for every kept sample in a dataset dir."""
    dataset_dir = Path(dataset_dir)
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    out = []
    for rec in manifest["samples"]:
        if rec.get("filtered"):
            continue
        sdir = dataset_dir / rec["path"]
        particles = load_particles(sdir / "particles.json")
        pattern = SewingPattern.from_json_dict(
            json.loads((sdir / "pattern.json").read_text()))
        meta = json.loads((sdir / "meta.json").read_text())
        out.append((particles, pattern, meta))
    return out


def load_manifest(dataset_dir) -> dict:
    return json.loads((Path(dataset_dir) / "manifest.json").read_text())
