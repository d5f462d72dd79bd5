"""Learned particles-to-pattern converters: conditional flow and regression.

Both share one architecture (ordered pattern-slot tokens with panel/edge
positional embeddings, cross-attending to an unordered particle context).
The flow variant learns a conditional velocity over pattern tensors and
samples by integration; the regression variant predicts the tensor in one
forward pass under squared error. Supervision masks the payload of invalid
slots: only their validity channel is trained, so the models learn to
switch slots off rather than hallucinate geometry.
"""

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import torch

from .distances import farthest_point_resample
from .flow import NonFiniteStateError
from .flow_net import (
    PatternVelocityNet,
    flat_parameters,
    load_flat_parameters,
    parameter_count,
)
from .particles import GarmentParticles
from .patterns import EDGE_DIM, POSE_DIM, SewingPattern, decode_pattern, encode_pattern

_VALID_CH = 14
_DX = slice(4, 6)


def project_closure(tensor: np.ndarray) -> np.ndarray:
    """Close each predicted panel's edge loop exactly.

    Every training tensor satisfies sum(delta) = 0 over its valid edges, so
    predictions are projected onto that constraint before decoding; without
    it, per-edge regression error accumulates into a spurious open loop.
    Valid edges are the prefix run of the validity channel, matching the
    decoder; stray validity blips past the prefix are cleared.
    """
    out = tensor.copy()
    for i in range(out.shape[0]):
        valid = out[i, 1:, _VALID_CH] > 0.5
        prefix = 0
        for flag in valid:
            if not flag:
                break
            prefix += 1
        out[i, 1 + prefix:, _VALID_CH] = np.minimum(
            out[i, 1 + prefix:, _VALID_CH], 0.0)
        if prefix >= 3:
            rows = np.arange(1, 1 + prefix)
            residual = out[i, rows, _DX].sum(axis=0)
            out[i, rows, _DX] -= residual / prefix
    return out


@dataclass
class PatternModelConfig:
    width: int = 96
    depth: int = 3
    heads: int = 4
    max_panels: int = 8
    max_edges: int = 8
    particle_channels: int = 6
    context_points: int = 192  # particle context is subsampled to this many


class PatternModelBase:
    kind = "base"

    def __init__(self, config: PatternModelConfig = None, seed: int = 0):
        self.config = config or PatternModelConfig()
        torch.manual_seed(seed)
        self.net = PatternVelocityNet(
            width=self.config.width,
            depth=self.config.depth,
            heads=self.config.heads,
            max_panels=self.config.max_panels,
            max_edges=self.config.max_edges,
            row_dim=EDGE_DIM,
            particle_channels=self.config.particle_channels,
        )
        self.net.eval()
        self.tensor_mean = np.zeros(EDGE_DIM)
        self.tensor_scale = np.ones(EDGE_DIM)
        self.particle_mean = np.zeros(self.config.particle_channels)
        self.particle_scale = np.ones(self.config.particle_channels)

    # ------------------------------------------------------------- stats

    def fit_normalization(self, tensors, particle_arrays):
        stacked = np.stack(tensors)  # (B, M, E+1, D)
        flat = stacked.reshape(-1, EDGE_DIM)
        self.tensor_mean = flat.mean(axis=0)
        self.tensor_scale = np.maximum(flat.std(axis=0), 0.05)
        pts = np.concatenate(particle_arrays)
        self.particle_mean = pts.mean(axis=0)
        self.particle_scale = np.maximum(pts.std(axis=0), 1e-6)

    def normalize_tensor(self, tensor):
        return (tensor - self.tensor_mean) / self.tensor_scale

    def denormalize_tensor(self, normalized):
        return normalized * self.tensor_scale + self.tensor_mean

    def context(self, particles: GarmentParticles, seed: int = 0) -> np.ndarray:
        """Normalized, density-capped particle context."""
        ch = particles.channels()
        if len(ch) > self.config.context_points:
            ch = farthest_point_resample(ch, self.config.context_points, seed=seed)
        return (ch - self.particle_mean) / self.particle_scale

    # ----------------------------------------------------------- storage

    def save(self, path):
        flat, slices = flat_parameters(self.net)
        np.savez(
            path,
            kind=self.kind,
            config=json.dumps(asdict(self.config)),
            slices=json.dumps({k: [int(o), list(s)] for k, (o, s) in slices.items()}),
            params=flat.astype(np.float32),
            tensor_mean=self.tensor_mean,
            tensor_scale=self.tensor_scale,
            particle_mean=self.particle_mean,
            particle_scale=self.particle_scale,
        )

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as data:
            kind = str(data["kind"])
            model_cls = {"pattern_flow": PatternFlowModel,
                         "pattern_regression": PatternRegressionModel}[kind]
            model = model_cls(PatternModelConfig(**json.loads(str(data["config"]))))
            slices = {
                k: (int(o), tuple(s))
                for k, (o, s) in json.loads(str(data["slices"])).items()
            }
            load_flat_parameters(model.net, data["params"], slices)
            model.tensor_mean = data["tensor_mean"]
            model.tensor_scale = data["tensor_scale"]
            model.particle_mean = data["particle_mean"]
            model.particle_scale = data["particle_scale"]
        return model

    def param_count(self) -> int:
        return parameter_count(self.net)


def supervision_weights(tensor: np.ndarray) -> np.ndarray:
    """Loss weights: payload only where slots are valid, validity everywhere.

    Pose rows count for present panels only; invalid edge slots contribute
    loss solely through their validity channel.
    """
    m, slots, d = tensor.shape
    w = np.zeros_like(tensor)
    for i in range(m):
        edge_valid = tensor[i, 1:, _VALID_CH] > 0.5
        present = bool(edge_valid.any())
        if present:
            w[i, 0, :POSE_DIM] = 1.0
        for j in range(1, slots):
            if edge_valid[j - 1]:
                w[i, j, :] = 1.0
            else:
                w[i, j, _VALID_CH] = 1.0
    return w


@dataclass
class PatternTrainConfig:
    iters: int = 1200
    batch: int = 8
    lr: float = 1e-3
    lr_final_factor: float = 0.1  # cosine decay floor
    seed: int = 0
    grad_clip: float = 1.0


def _cosine_lr(cfg: PatternTrainConfig, it: int) -> float:
    floor = cfg.lr * cfg.lr_final_factor
    return floor + 0.5 * (cfg.lr - floor) * (1 + np.cos(np.pi * it / max(cfg.iters, 1)))


def _prepare(model: PatternModelBase, dataset):
    """dataset: sequence of (GarmentParticles, SewingPattern)."""
    tensors = [encode_pattern(p) for _, p in dataset]
    if np.allclose(model.tensor_scale, 1.0) and np.allclose(model.tensor_mean, 0.0):
        model.fit_normalization(tensors, [pp.channels() for pp, _ in dataset])
    items = []
    for (particles, _), tensor in zip(dataset, tensors):
        ctx = model.context(particles, seed=0)
        items.append((
            model.normalize_tensor(tensor),
            supervision_weights(tensor),
            ctx,
        ))
    return items


def _context_batch(items, idx):
    n_max = max(items[i][2].shape[0] for i in idx)
    b = len(idx)
    dim = items[idx[0]][2].shape[1]
    ctx = np.zeros((b, n_max, dim))
    mask = np.zeros((b, n_max), dtype=bool)
    for row, i in enumerate(idx):
        c = items[i][2]
        ctx[row, : len(c)] = c
        mask[row, : len(c)] = True
    return (
        torch.as_tensor(ctx, dtype=torch.float32),
        torch.as_tensor(mask),
    )


class PatternFlowModel(PatternModelBase):
    """Conditional flow over pattern tensors; robust to corrupted particles."""

    kind = "pattern_flow"

    def train_model(self, dataset, cfg: PatternTrainConfig = None):
        cfg = cfg or PatternTrainConfig()
        items = _prepare(self, dataset)
        gen = torch.Generator().manual_seed(cfg.seed)
        picker = np.random.default_rng(cfg.seed)
        net = self.net
        net.train()
        opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
        losses = []
        try:
            for it in range(cfg.iters):
                for group in opt.param_groups:
                    group["lr"] = _cosine_lr(cfg, it)
                idx = picker.integers(0, len(items), size=cfg.batch)
                x1 = torch.as_tensor(
                    np.stack([items[i][0] for i in idx]), dtype=torch.float32)
                w = torch.as_tensor(
                    np.stack([items[i][1] for i in idx]), dtype=torch.float32)
                ctx, mask = _context_batch(items, idx)
                x0 = torch.randn(x1.shape, generator=gen, dtype=x1.dtype)
                t = torch.rand(len(idx), generator=gen, dtype=x1.dtype)
                tb = t[:, None, None, None]
                xt = tb * x1 + (1.0 - tb) * x0
                pred = net(xt, t, ctx, mask)
                loss = (((pred - (x1 - x0)) ** 2) * w).sum() / w.sum().clamp(min=1.0)
                if not torch.isfinite(loss):
                    raise NonFiniteStateError(f"non-finite loss at iteration {it}")
                opt.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.grad_clip)
                opt.step()
                losses.append(float(loss.detach()))
        finally:
            net.eval()
        return losses

    def recover(self, particles: GarmentParticles, steps: int = 64,
                seed: int = 0) -> SewingPattern:
        """Integrate the conditional flow from noise and decode."""
        ctx_np = self.context(particles, seed=seed)
        ctx = torch.as_tensor(ctx_np, dtype=torch.float32)[None]
        mask = torch.ones(1, ctx.shape[1], dtype=torch.bool)
        rng = np.random.default_rng(seed)
        shape = (self.config.max_panels, self.config.max_edges + 1, EDGE_DIM)
        x = rng.standard_normal(shape)
        dt = 1.0 / steps
        with torch.no_grad():
            for k in range(steps):
                t = k * dt
                xt = torch.as_tensor(x, dtype=torch.float32)[None]
                tt = torch.tensor([t], dtype=torch.float32)
                v = self.net(xt, tt, ctx, mask)[0].double().numpy()
                if not np.isfinite(v).all():
                    raise NonFiniteStateError(f"non-finite velocity at step {k}")
                x = x + dt * v
        return decode_pattern(project_closure(self.denormalize_tensor(x)))


class PatternRegressionModel(PatternModelBase):
    """Same architecture trained with squared error; one deterministic pass."""

    kind = "pattern_regression"

    def train_model(self, dataset, cfg: PatternTrainConfig = None):
        cfg = cfg or PatternTrainConfig()
        items = _prepare(self, dataset)
        gen = torch.Generator().manual_seed(cfg.seed)
        picker = np.random.default_rng(cfg.seed)
        net = self.net
        net.train()
        opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
        losses = []
        zeros_t = torch.zeros(cfg.batch, dtype=torch.float32)
        try:
            for it in range(cfg.iters):
                for group in opt.param_groups:
                    group["lr"] = _cosine_lr(cfg, it)
                idx = picker.integers(0, len(items), size=cfg.batch)
                x1 = torch.as_tensor(
                    np.stack([items[i][0] for i in idx]), dtype=torch.float32)
                w = torch.as_tensor(
                    np.stack([items[i][1] for i in idx]), dtype=torch.float32)
                ctx, mask = _context_batch(items, idx)
                pred = net(torch.zeros_like(x1), zeros_t[: len(idx)], ctx, mask)
                loss = (((pred - x1) ** 2) * w).sum() / w.sum().clamp(min=1.0)
                if not torch.isfinite(loss):
                    raise NonFiniteStateError(f"non-finite loss at iteration {it}")
                opt.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.grad_clip)
                opt.step()
                losses.append(float(loss.detach()))
        finally:
            net.eval()
        return losses

    def recover(self, particles: GarmentParticles, seed: int = 0) -> SewingPattern:
        ctx_np = self.context(particles, seed=seed)
        ctx = torch.as_tensor(ctx_np, dtype=torch.float32)[None]
        mask = torch.ones(1, ctx.shape[1], dtype=torch.bool)
        shape = (1, self.config.max_panels, self.config.max_edges + 1, EDGE_DIM)
        with torch.no_grad():
            pred = self.net(
                torch.zeros(shape, dtype=torch.float32),
                torch.zeros(1, dtype=torch.float32),
                ctx, mask,
            )[0].double().numpy()
        return decode_pattern(project_closure(self.denormalize_tensor(pred)))
