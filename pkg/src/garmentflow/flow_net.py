"""Transformer velocity networks (torch).

Particles are an unordered set, so the particle network uses no positional
encodings anywhere: plain self-attention over set elements, cross-attention
to conditioning tokens, and the diffusion time injected through adaptive
layer-norm modulation. Masked slots are excluded from attention keys and
zeroed on input/output, so their content cannot influence real slots.
"""

import math

import numpy as np
import torch
import torch.nn as nn


def sinusoidal_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard sin/cos features of t in [0, 1], shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=t.dtype, device=t.device) / half
    )
    args = t[:, None] * 1000.0 * freqs[None, :]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[:, :1])], dim=-1)
    return emb


class Attention(nn.Module):
    """Multi-head attention; queries from x, keys/values from ctx."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        if width % heads:
            raise ValueError("width must be divisible by heads")
        self.heads = heads
        self.head_dim = width // heads
        self.q = nn.Linear(width, width)
        self.k = nn.Linear(width, width)
        self.v = nn.Linear(width, width)
        self.out = nn.Linear(width, width)

    def forward(self, x, ctx, key_mask=None):
        b, n, w = x.shape
        m = ctx.shape[1]
        q = self.q(x).view(b, n, self.heads, self.head_dim).transpose(1, 2)
        k = self.k(ctx).view(b, m, self.heads, self.head_dim).transpose(1, 2)
        v = self.v(ctx).view(b, m, self.heads, self.head_dim).transpose(1, 2)
        logits = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if key_mask is not None:
            logits = logits.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        weights = torch.softmax(logits, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(b, n, w)
        return self.out(out)


def _modulate(x, shift, scale):
    return x * (1.0 + scale[:, None, :]) + shift[:, None, :]


class TransformerBlock(nn.Module):
    """Pre-norm block: self-attention, cross-attention, MLP, all adaLN-gated."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(width, elementwise_affine=False)
        self.attn = Attention(width, heads)
        self.norm2 = nn.LayerNorm(width, elementwise_affine=False)
        self.cross = Attention(width, heads)
        self.norm3 = nn.LayerNorm(width, elementwise_affine=False)
        self.mlp = nn.Sequential(
            nn.Linear(width, 4 * width), nn.GELU(), nn.Linear(4 * width, width)
        )
        self.modulation = nn.Linear(width, 9 * width)
        nn.init.zeros_(self.modulation.weight)
        nn.init.zeros_(self.modulation.bias)

    def forward(self, x, ctx, temb, key_mask=None, ctx_mask=None):
        mods = self.modulation(torch.nn.functional.silu(temb)).chunk(9, dim=-1)
        sh1, sc1, g1, sh2, sc2, g2, sh3, sc3, g3 = mods
        h1 = _modulate(self.norm1(x), sh1, sc1)
        x = x + g1[:, None, :] * self.attn(h1, h1, key_mask=key_mask)
        x = x + g2[:, None, :] * self.cross(
            _modulate(self.norm2(x), sh2, sc2), ctx, key_mask=ctx_mask)
        x = x + g3[:, None, :] * self.mlp(_modulate(self.norm3(x), sh3, sc3))
        return x


class SetVelocityNet(nn.Module):
    """Velocity field over particle sets; permutation-equivariant by design."""

    def __init__(self, width=96, depth=3, heads=4, channels=6,
                 cond_tokens=4, cond_vocab=16):
        super().__init__()
        self.channels = channels
        self.cond_tokens = cond_tokens
        self.in_proj = nn.Linear(channels, width)
        self.time_mlp = nn.Sequential(
            nn.Linear(width, width), nn.SiLU(), nn.Linear(width, width)
        )
        self.cond_embed = nn.Embedding(cond_vocab, width)
        self.null_cond = nn.Parameter(torch.zeros(cond_tokens, width))
        self.blocks = nn.ModuleList(TransformerBlock(width, heads) for _ in range(depth))
        self.final_norm = nn.LayerNorm(width, elementwise_affine=False)
        self.final_modulation = nn.Linear(width, 2 * width)
        self.out_proj = nn.Linear(width, channels)
        # Zero-init the output head: the velocity field is identically zero
        # at initialization.
        nn.init.zeros_(self.final_modulation.weight)
        nn.init.zeros_(self.final_modulation.bias)
        nn.init.zeros_(self.out_proj.weight)
        nn.init.zeros_(self.out_proj.bias)

    def forward(self, x, t, cond=None, mask=None):
        """x: (B, N, C); t: (B,); cond: (B, K) int tokens or None; mask: (B, N) bool."""
        b, n, _ = x.shape
        if mask is None:
            mask = torch.ones(b, n, dtype=torch.bool, device=x.device)
        x = x * mask[:, :, None]
        h = self.in_proj(x)
        temb = self.time_mlp(sinusoidal_embedding(t, h.shape[-1]))
        if cond is None:
            ctx = self.null_cond[None].expand(b, -1, -1).to(h.dtype)
        else:
            ctx = self.cond_embed(cond)
        for block in self.blocks:
            h = block(h, ctx, temb, key_mask=mask)
        sh, sc = self.final_modulation(torch.nn.functional.silu(temb)).chunk(2, dim=-1)
        out = self.out_proj(_modulate(self.final_norm(h), sh, sc))
        return out * mask[:, :, None]


class PatternVelocityNet(nn.Module):
    """Velocity field over flattened pattern tensors, conditioned on particles.

    Pattern slots are ordered, so tokens get a learned panel-plus-edge
    positional embedding (outer sum); the particle context stays unordered
    (no positional encoding) and enters through cross-attention.
    """

    def __init__(self, width=96, depth=3, heads=4, max_panels=8, max_edges=8,
                 row_dim=15, particle_channels=6):
        super().__init__()
        self.max_panels = max_panels
        self.max_edges = max_edges
        self.row_dim = row_dim
        self.in_proj = nn.Linear(row_dim, width)
        self.panel_embed = nn.Parameter(torch.randn(max_panels, width) * 0.02)
        self.edge_embed = nn.Parameter(torch.randn(max_edges + 1, width) * 0.02)
        self.particle_proj = nn.Linear(particle_channels, width)
        self.particle_block = TransformerBlock(width, heads)
        self.time_mlp = nn.Sequential(
            nn.Linear(width, width), nn.SiLU(), nn.Linear(width, width)
        )
        self.blocks = nn.ModuleList(TransformerBlock(width, heads) for _ in range(depth))
        self.final_norm = nn.LayerNorm(width, elementwise_affine=False)
        self.final_modulation = nn.Linear(width, 2 * width)
        self.out_proj = nn.Linear(width, row_dim)
        nn.init.zeros_(self.final_modulation.weight)
        nn.init.zeros_(self.final_modulation.bias)
        nn.init.zeros_(self.out_proj.weight)
        nn.init.zeros_(self.out_proj.bias)

    def forward(self, x, t, particles, particle_mask=None):
        """x: (B, M, E+1, D) tensor state; particles: (B, P, 6) normalized."""
        b = x.shape[0]
        tokens = x.reshape(b, self.max_panels * (self.max_edges + 1), self.row_dim)
        h = self.in_proj(tokens)
        pos = (self.panel_embed[:, None, :] + self.edge_embed[None, :, :]).reshape(
            1, -1, h.shape[-1]
        )
        h = h + pos
        temb = self.time_mlp(sinusoidal_embedding(t, h.shape[-1]))
        if particle_mask is None:
            particle_mask = torch.ones(
                b, particles.shape[1], dtype=torch.bool, device=particles.device
            )
        ctx = self.particle_proj(particles * particle_mask[:, :, None])
        ctx = self.particle_block(ctx, ctx, temb, key_mask=particle_mask,
                                  ctx_mask=particle_mask)
        for block in self.blocks:
            h = block(h, ctx, temb, ctx_mask=particle_mask)
        sh, sc = self.final_modulation(torch.nn.functional.silu(temb)).chunk(2, dim=-1)
        out = self.out_proj(_modulate(self.final_norm(h), sh, sc))
        return out.reshape(b, self.max_panels, self.max_edges + 1, self.row_dim)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def flat_parameters(module: nn.Module):
    """Flatten parameters into one vector plus named (offset, shape) slices."""
    slices = {}
    chunks = []
    offset = 0
    for name, p in module.named_parameters():
        arr = p.detach().cpu().numpy().ravel()
        slices[name] = (offset, tuple(p.shape))
        chunks.append(arr)
        offset += arr.size
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    return flat, slices


def load_flat_parameters(module: nn.Module, flat, slices):
    flat = np.asarray(flat)
    with torch.no_grad():
        for name, p in module.named_parameters():
            offset, shape = slices[name]
            size = int(np.prod(shape)) if shape else 1
            chunk = flat[offset:offset + size].reshape(shape)
            p.copy_(torch.as_tensor(chunk, dtype=p.dtype))
