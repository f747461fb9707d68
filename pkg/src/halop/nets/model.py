"""Sequence encoder plus per-stage actor/critic heads, with checkpoints.

One shared representation network encodes the standardized snapshot window;
the per-stage heads are two fully-connected layers each.  Stage-2 heads (and
the single-stage baseline variants) receive the three private scalars
concatenated to the representation.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor, concat, constant
from .layers import AttentivePool, EncoderBlock, Linear, ParameterStore

__all__ = ["EncoderConfig", "HeadConfig", "ExecutionNet", "save_checkpoint", "load_checkpoint"]

_MAGIC = b"HLNET001"

VARIANTS = ("halop", "stage1", "gaussian", "softmax")


@dataclass(frozen=True)
class EncoderConfig:
    """Shape of the representation network."""

    n_features: int = 21
    window: int = 8
    channels: tuple[int, ...] = (16, 16)
    kernel: int = 3
    stride: int = 2
    attn_heads: int = 2
    out_dim: int = 16

    def validate(self) -> None:
        if min(self.n_features, self.window, self.kernel, self.stride,
               self.attn_heads, self.out_dim, *self.channels) < 1:
            raise ValueError("all encoder dimensions must be positive")
        total_stride = self.stride ** len(self.channels)
        if self.window % total_stride:
            raise ValueError(
                f"window {self.window} not divisible by total stride {total_stride}"
            )
        for c in self.channels:
            if c % self.attn_heads:
                raise ValueError(f"channels {c} not divisible by heads {self.attn_heads}")


@dataclass(frozen=True)
class HeadConfig:
    """Shape of the actor/critic heads (two fully-connected layers each).

    ``stage1_scale`` converts the O(1) network outputs into percentage
    units: stage-1 actions live on a grid spanning a fraction of a percent,
    and optimizing raw outputs at that scale is badly conditioned.
    """

    hidden: int = 32
    private_dim: int = 3
    sigma_min: float = 1e-3
    sigma_init_stage1: float = 4e-3
    sigma_init_stage2: float = 1.5
    stage1_scale: float = 4e-3

    def validate(self) -> None:
        if self.hidden < 1 or self.private_dim < 0:
            raise ValueError("head dimensions must be positive")
        if self.sigma_min <= 0.0 or self.stage1_scale <= 0.0:
            raise ValueError("sigma_min and stage1_scale must be positive")
        for init in (self.sigma_init_stage1, self.sigma_init_stage2):
            if init <= self.sigma_min:
                raise ValueError("sigma_init must exceed sigma_min")


def _softplus_inv(y: float) -> float:
    return math.log(math.expm1(y))


class _GaussianHead:
    """Two-layer head emitting (mu, sigma) in action units.

    The raw outputs are O(1); ``scale`` maps them onto the action scale so
    the optimizer is well conditioned regardless of tick granularity.
    """

    def __init__(self, store, name, n_in, hidden, sigma_min, sigma_init, scale=1.0):
        self.sigma_min = sigma_min
        self.scale = scale
        self.body = Linear(store, f"{name}.body", n_in, hidden)
        self.mu_out = Linear(store, f"{name}.mu", hidden, 1, init="orthogonal", gain=0.01)
        self.sigma_out = Linear(
            store, f"{name}.sigma", hidden, 1, init="orthogonal", gain=0.01,
            bias_value=_softplus_inv((sigma_init - sigma_min) / scale),
        )

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        h = self.body(x).tanh()
        mu = self.mu_out(h).reshape(-1) * self.scale
        sigma = self.sigma_out(h).reshape(-1).softplus() * self.scale + self.sigma_min
        return mu, sigma


class _ValueHead:
    def __init__(self, store, name, n_in, hidden):
        self.body = Linear(store, f"{name}.body", n_in, hidden)
        self.out = Linear(store, f"{name}.out", hidden, 1, init="orthogonal", gain=1.0)

    def __call__(self, x: Tensor) -> Tensor:
        return self.out(self.body(x).tanh()).reshape(-1)


class _LogitsHead:
    def __init__(self, store, name, n_in, hidden, n_out):
        self.body = Linear(store, f"{name}.body", n_in, hidden)
        self.out = Linear(store, f"{name}.out", hidden, n_out, init="orthogonal", gain=0.01)

    def __call__(self, x: Tensor) -> Tensor:
        return self.out(self.body(x).tanh())


class ExecutionNet:
    """Encoder plus heads for one policy variant.

    ``halop`` carries two actor/critic pairs (stage 1 on the representation
    alone, stage 2 on representation + private scalars).  The single-stage
    variants (``stage1``, ``gaussian``, ``softmax``) carry one pair that
    consumes representation + private scalars.
    """

    def __init__(
        self,
        encoder_cfg: EncoderConfig,
        head_cfg: HeadConfig,
        variant: str = "halop",
        n_logits: int | None = None,
        seed: int = 0,
    ):
        encoder_cfg.validate()
        head_cfg.validate()
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
        if variant == "softmax" and (n_logits is None or n_logits < 2):
            raise ValueError("softmax variant needs n_logits >= 2")
        self.encoder_cfg = encoder_cfg
        self.head_cfg = head_cfg
        self.variant = variant
        self.n_logits = n_logits
        self.store = ParameterStore(seed)

        store = self.store
        self._blocks = []
        n_in = encoder_cfg.n_features
        for i, ch in enumerate(encoder_cfg.channels):
            self._blocks.append(
                EncoderBlock(store, f"enc.block{i}", n_in, ch,
                             encoder_cfg.kernel, encoder_cfg.stride, encoder_cfg.attn_heads)
            )
            n_in = ch
        self._pool = AttentivePool(store, "enc.pool", n_in, n_in)
        self._proj = Linear(store, "enc.proj", n_in, encoder_cfg.out_dim)

        d = encoder_cfg.out_dim
        dp = d + head_cfg.private_dim
        h = head_cfg.hidden
        if variant == "halop":
            self._actor1 = _GaussianHead(store, "actor1", d, h,
                                         head_cfg.sigma_min, head_cfg.sigma_init_stage1,
                                         scale=head_cfg.stage1_scale)
            self._critic1 = _ValueHead(store, "critic1", d, h)
            self._actor2 = _GaussianHead(store, "actor2", dp, h,
                                         head_cfg.sigma_min, head_cfg.sigma_init_stage2)
            self._critic2 = _ValueHead(store, "critic2", dp, h)
        elif variant in ("stage1", "gaussian"):
            self._actor1 = _GaussianHead(store, "actor1", dp, h,
                                         head_cfg.sigma_min, head_cfg.sigma_init_stage1,
                                         scale=head_cfg.stage1_scale)
            self._critic1 = _ValueHead(store, "critic1", dp, h)
        else:  # softmax
            self._logits = _LogitsHead(store, "actor1", dp, h, n_logits)
            self._critic1 = _ValueHead(store, "critic1", dp, h)

    # -- forward -------------------------------------------------------------

    def encode(self, windows) -> Tensor:
        """Representation of standardized windows (B, W, F) or a single (W, F)."""
        x = windows if isinstance(windows, Tensor) else constant(np.asarray(windows))
        if x.data.ndim == 2:
            x = x.reshape(1, *x.data.shape)
        if x.data.ndim != 3 or x.data.shape[1:] != (
            self.encoder_cfg.window,
            self.encoder_cfg.n_features,
        ):
            raise ValueError(
                f"expected windows (B, {self.encoder_cfg.window}, "
                f"{self.encoder_cfg.n_features}), got {x.data.shape}"
            )
        for block in self._blocks:
            x = block(x)
        return self._proj(self._pool(x)).tanh()

    def _head_input(self, stage: int, rep: Tensor, private) -> Tensor:
        needs_private = stage == 2 or self.variant != "halop"
        if needs_private:
            if private is None:
                raise ValueError(f"variant {self.variant} stage {stage} needs the private state")
            p = private if isinstance(private, Tensor) else constant(np.asarray(private))
            if p.data.ndim == 1:
                p = p.reshape(1, -1)
            return concat([rep, p], axis=-1)
        if private is not None:
            raise ValueError("stage 1 of the two-stage policy is public-state only")
        return rep

    def actor_head(self, stage: int, rep: Tensor, private=None):
        """Per-stage Gaussian parameters (mu, sigma), sigma floored."""
        if stage not in (1, 2):
            raise ValueError(f"stage must be 1 or 2, got {stage}")
        x = self._head_input(stage, rep, private)
        if stage == 1:
            return self._actor1(x)
        if self.variant != "halop":
            raise ValueError(f"variant {self.variant} has no stage-2 head")
        return self._actor2(x)

    def critic_head(self, stage: int, rep: Tensor, private=None) -> Tensor:
        if stage not in (1, 2):
            raise ValueError(f"stage must be 1 or 2, got {stage}")
        x = self._head_input(stage, rep, private)
        if stage == 1:
            return self._critic1(x)
        if self.variant != "halop":
            raise ValueError(f"variant {self.variant} has no stage-2 head")
        return self._critic2(x)

    def logits_head(self, rep: Tensor, private) -> Tensor:
        if self.variant != "softmax":
            raise ValueError("logits head only exists on the softmax variant")
        return self._logits(self._head_input(1, rep, private))

    # -- persistence -----------------------------------------------------------

    def config_dict(self) -> dict:
        return {
            "encoder": asdict(self.encoder_cfg),
            "head": asdict(self.head_cfg),
            "variant": self.variant,
            "n_logits": self.n_logits,
            "seed": self.store.seed,
        }

    def save(self, path: str | Path) -> Path:
        return save_checkpoint(path, self.config_dict(), dict(self.store.items()))

    @classmethod
    def load(cls, path: str | Path) -> "ExecutionNet":
        config, arrays = load_checkpoint(path)
        enc = dict(config["encoder"])
        enc["channels"] = tuple(enc["channels"])
        net = cls(
            EncoderConfig(**enc),
            HeadConfig(**config["head"]),
            variant=config["variant"],
            n_logits=config["n_logits"],
            seed=config["seed"],
        )
        for name, arr in arrays.items():
            net.store[name].data = arr
        return net


def save_checkpoint(path: str | Path, config: dict, params: dict) -> Path:
    """Versioned binary checkpoint: JSON header plus raw float64 payload.

    Byte-for-byte deterministic (no timestamps), so identical runs produce
    identical files.
    """
    path = Path(path)
    header = {
        "format_version": 1,
        "config": config,
        "arrays": [
            {"name": name, "shape": list(np.asarray(getattr(p, "data", p)).shape)}
            for name, p in params.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for p in params.values():
            data = np.asarray(getattr(p, "data", p), dtype="<f8")
            fh.write(data.tobytes())
    return path


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        (size,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(size).decode("utf-8"))
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return header["config"], arrays
