"""Actor-critic network over the two-channel AEM state, and the random baseline."""

from __future__ import annotations

import math
import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .world import NUM_ACTIONS, Action

CHECKPOINT_MAGIC = b"EGOX"
CHECKPOINT_VERSION = 1


@dataclass
class NetConfig:
    channels: tuple[int, ...] = (8, 16, 32, 32)
    kernel: int = 3
    pooled: int = 4  # adaptive pool side before the fully connected layer
    hidden: int = 128
    input_scale: float = 1.0  # state enters as sign(x) * log1p(|x| * input_scale)
    seed: int = 0

    def validate(self) -> None:
        if not self.channels or any(c <= 0 for c in self.channels):
            raise ValueError("channels must be a non-empty tuple of positive ints")
        if self.kernel % 2 != 1:
            raise ValueError("kernel must be odd")
        if self.pooled <= 0 or self.hidden <= 0 or self.input_scale <= 0:
            raise ValueError("pooled, hidden and input_scale must be positive")


@dataclass(frozen=True, eq=False)
class PolicyOutput:
    logits: np.ndarray
    probs: np.ndarray
    value: float


class PolicyNet(nn.Module):
    """Strided conv trunk, then a shared hidden layer feeding policy and value heads.

    Final layers start at zero so the initial policy is uniform and V = 0.
    """

    def __init__(self, cfg: NetConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or NetConfig()
        cfg.validate()
        convs = []
        c_in = 2
        for c_out in cfg.channels:
            convs.append(nn.Conv2d(c_in, c_out, cfg.kernel, stride=2, padding=cfg.kernel // 2))
            c_in = c_out
        self.convs = nn.ModuleList(convs)
        self.fc = nn.Linear(c_in * cfg.pooled ** 2, cfg.hidden)
        self.pi = nn.Linear(cfg.hidden, NUM_ACTIONS)
        self.v = nn.Linear(cfg.hidden, 1)
        gen = torch.Generator().manual_seed(cfg.seed)
        for m in [*self.convs, self.fc]:
            nn.init.orthogonal_(m.weight, gain=math.sqrt(2), generator=gen)
            nn.init.zeros_(m.bias)
        for m in (self.pi, self.v):
            nn.init.zeros_(m.weight)
            nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """``x``: (B, 257, 257, 2) raw AEM crops. Returns logits (B, 6) and values (B,)."""
        x = x.permute(0, 3, 1, 2)
        x = torch.sign(x) * torch.log1p(x.abs() * self.cfg.input_scale)
        for conv in self.convs:
            x = F.elu(conv(x))
        x = F.adaptive_avg_pool2d(x, self.cfg.pooled).flatten(1)
        h = F.elu(self.fc(x))
        return self.pi(h), self.v(h).squeeze(-1)

    # flat parameter view ------------------------------------------------

    def segments(self) -> "OrderedDict[str, tuple[int, ...]]":
        return OrderedDict((k, tuple(p.shape)) for k, p in self.named_parameters())

    @property
    def num_params(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def flat_params(self) -> np.ndarray:
        return torch.cat([p.detach().reshape(-1) for p in self.parameters()]).cpu().numpy().astype(np.float64)

    def set_flat_params(self, flat) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got {flat.shape}")
        i = 0
        with torch.no_grad():
            for p in self.parameters():
                n = p.numel()
                p.copy_(torch.from_numpy(flat[i:i + n].reshape(p.shape)).to(p.dtype))
                i += n

    def segment_slices(self) -> "OrderedDict[str, slice]":
        out, i = OrderedDict(), 0
        for k, p in self.named_parameters():
            out[k] = slice(i, i + p.numel())
            i += p.numel()
        return out


def _state_tensor(state, dtype) -> torch.Tensor:
    s = np.asarray(state)
    if s.ndim == 3:
        s = s[None]
    if s.ndim != 4 or s.shape[-1] != 2:
        raise ValueError(f"state must be (H, W, 2) or (B, H, W, 2), got {s.shape}")
    if not np.isfinite(s).all():
        raise ValueError("state contains non-finite values")
    return torch.from_numpy(np.ascontiguousarray(s)).to(dtype)


def _dtype(net: nn.Module) -> torch.dtype:
    return next(net.parameters()).dtype


def forward(net: PolicyNet, state) -> PolicyOutput:
    with torch.no_grad():
        logits, value = net(_state_tensor(state, _dtype(net)))
    logits = logits[0].double()
    probs = torch.softmax(logits, dim=-1)
    return PolicyOutput(logits.numpy(), probs.numpy(), float(value[0]))


def actor_critic_loss(logits: torch.Tensor, values: torch.Tensor, actions: torch.Tensor, advantages: torch.Tensor,
                      targets: torch.Tensor, entropy_coeff: float, value_coeff: float) -> torch.Tensor:
    """Summed over the batch: -log pi(a|s) A + c_v (V - R)^2 - c_e H(pi)."""
    logp = torch.log_softmax(logits, dim=-1)
    logp_a = logp.gather(1, actions[:, None]).squeeze(1)
    entropy = -(logp.exp() * logp).sum(-1)
    return (-logp_a * advantages + value_coeff * (values - targets) ** 2 - entropy_coeff * entropy).sum()


def backward(net: PolicyNet, state, action_taken: int, advantage: float, return_target: float,
             entropy_coeff: float = 0.01, value_coeff: float = 0.5) -> np.ndarray:
    """Exact gradient of the single-sample actor-critic loss, as a flat vector (float64)."""
    if not (math.isfinite(advantage) and math.isfinite(return_target)):
        raise ValueError("advantage and return target must be finite")
    dt = _dtype(net)
    net.zero_grad(set_to_none=True)
    logits, values = net(_state_tensor(state, dt))
    loss = actor_critic_loss(logits, values, torch.tensor([int(action_taken)]), torch.tensor([advantage], dtype=dt),
                             torch.tensor([return_target], dtype=dt), entropy_coeff, value_coeff)
    grads = torch.autograd.grad(loss, list(net.parameters()))
    return torch.cat([g.reshape(-1) for g in grads]).double().numpy()


def sample_action(probs, rng: np.random.Generator, greedy: bool = False) -> Action:
    """Inverse-CDF draw from ``probs`` using one uniform from ``rng``; greedy takes the first argmax."""
    p = np.asarray(probs, dtype=np.float64)
    if greedy:
        return Action(int(np.argmax(p)))
    u = rng.random()
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return Action(min(idx, len(p) - 1))


def random_policy() -> np.ndarray:
    return np.full(NUM_ACTIONS, 1.0 / NUM_ACTIONS)


# checkpoint I/O -----------------------------------------------------------

def save_tensors(path, tensors: "OrderedDict[str, np.ndarray]") -> None:
    """Versioned binary: magic, version, segment table (name, shape), then little-endian float32 data."""
    path = Path(path)
    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(tensors))]
    for name, arr in tensors.items():
        key = name.encode("utf-8")
        parts.append(struct.pack("<H", len(key)) + key)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in tensors.values():
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


def load_tensors(path) -> "OrderedDict[str, np.ndarray]":
    buf = Path(path).read_bytes()
    if buf[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    try:
        version, n = struct.unpack_from("<II", buf, 4)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        off = 12
        table = []
        for _ in range(n):
            (klen,) = struct.unpack_from("<H", buf, off)
            name = buf[off + 2:off + 2 + klen].decode("utf-8")
            off += 2 + klen
            (ndim,) = struct.unpack_from("<B", buf, off)
            shape = struct.unpack_from(f"<{ndim}I", buf, off + 1)
            off += 1 + 4 * ndim
            table.append((name, shape))
        out = OrderedDict()
        for name, shape in table:
            count = int(np.prod(shape, dtype=np.int64))
            out[name] = np.frombuffer(buf, dtype="<f4", count=count, offset=off).reshape(shape).copy()
            off += 4 * count
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, ValueError) and str(exc).startswith(str(path)):
            raise
        raise ValueError(f"{path}: truncated or corrupt checkpoint ({exc})") from exc
    if off != len(buf):
        raise ValueError(f"{path}: {len(buf) - off} trailing bytes in checkpoint")
    return out


def net_tensors(net: PolicyNet, prefix: str = "") -> "OrderedDict[str, np.ndarray]":
    return OrderedDict((prefix + k, p.detach().cpu().numpy()) for k, p in net.named_parameters())


def save_checkpoint(net: PolicyNet, path) -> None:
    save_tensors(path, net_tensors(net))


def load_into(net: PolicyNet, tensors, prefix: str = "") -> None:
    expected = net.segments()
    got = OrderedDict((k[len(prefix):], v) for k, v in tensors.items() if k.startswith(prefix))
    if list(got) != list(expected):
        raise ValueError(f"checkpoint segments {list(got)} do not match network {list(expected)}")
    for k, shape in expected.items():
        if got[k].shape != shape:
            raise ValueError(f"segment {k}: checkpoint shape {got[k].shape} != network shape {shape}")
    with torch.no_grad():
        for k, p in net.named_parameters():
            p.copy_(torch.from_numpy(got[k]).to(p.dtype))


def load_checkpoint(net: PolicyNet, path) -> PolicyNet:
    tensors = load_tensors(path)
    load_into(net, OrderedDict((k, v) for k, v in tensors.items() if not k.startswith("adam.")))
    return net
