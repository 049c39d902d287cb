"""Dual-branch Q/preference network and the DQN-family baseline heads.

Parameters are exposed as ``name -> ndarray`` views into one flat buffer,
so they can be fed to a :class:`~pgdqn.numcore.Tape` by name and updated
per branch in a single vector op. Names::

    embed.{i}.w / .b        shared trunk (Q trunk when sharing is off)
    pembed.{i}.w / .b       preference trunk, only when sharing is off
    q.{i}.w / .b            Q head (``w_mu``/``w_sigma``/... when noisy)
    q.value.* / q.adv.*     dueling output streams
    pref.{i}.w / .b         preference head (logits of eta)
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .numcore import autodiff as ad
from .numcore.functional import softmax
from .numcore.prng import Prng

VARIANTS = ("DQN", "D2QN", "VD-D3QN", "NoisyNet-DQN", "PGDQN")
CHECKPOINT_FORMAT = "pgdqn-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class AgentVariant:
    name: str
    head: str  # plain | dueling
    target_rule: str  # max | double
    exploration: str  # epsilon-greedy | noisy | preference-guided

    @property
    def dual(self) -> bool:
        return self.exploration == "preference-guided"


_VARIANTS = {
    "DQN": AgentVariant("DQN", "plain", "max", "epsilon-greedy"),
    "D2QN": AgentVariant("D2QN", "plain", "double", "epsilon-greedy"),
    "VD-D3QN": AgentVariant("VD-D3QN", "dueling", "double", "epsilon-greedy"),
    "NoisyNet-DQN": AgentVariant("NoisyNet-DQN", "plain", "max", "noisy"),
    "PGDQN": AgentVariant("PGDQN", "plain", "max", "preference-guided"),
}
_ALIASES = {"noisynet": "NoisyNet-DQN", "noisy": "NoisyNet-DQN", "vd-d3qn": "VD-D3QN", "d3qn": "VD-D3QN",
            "v-d d3qn": "VD-D3QN", "dqn": "DQN", "d2qn": "D2QN", "ddqn": "D2QN", "pgdqn": "PGDQN"}


def get_variant(name: str) -> AgentVariant:
    key = name if name in _VARIANTS else _ALIASES.get(name.lower())
    if key is None:
        raise ValueError(f"unknown variant {name!r}; expected one of {', '.join(VARIANTS)}")
    return _VARIANTS[key]


@dataclass(frozen=True)
class NetworkSpec:
    obs_dim: int
    n_actions: int
    embed_sizes: tuple[int, ...] = (128, 128)
    head_hidden: tuple[int, ...] = (128,)
    dueling: bool = False
    noisy: bool = False
    preference: bool = True
    share_embedding: bool = True
    sigma0: float = 0.5

    @classmethod
    def for_variant(cls, variant: AgentVariant, obs_dim: int, n_actions: int, **kw) -> "NetworkSpec":
        return cls(obs_dim, n_actions, dueling=variant.head == "dueling", noisy=variant.exploration == "noisy",
                   preference=variant.dual or kw.pop("preference", False), **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["embed_sizes"] = list(self.embed_sizes)
        d["head_hidden"] = list(self.head_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        d = dict(d)
        d["embed_sizes"] = tuple(d["embed_sizes"])
        d["head_hidden"] = tuple(d["head_hidden"])
        return cls(**d)


def _dense_init(rng: Prng, n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray]:
    bound = 1.0 / math.sqrt(n_in)
    w = np.array(rng.uniform_array(-bound, bound, n_in * n_out)).reshape(n_out, n_in)
    b = np.array(rng.uniform_array(-bound, bound, n_out))
    return w, b


def _noisy_init(rng: Prng, n_in: int, n_out: int, sigma0: float) -> dict[str, np.ndarray]:
    w, b = _dense_init(rng, n_in, n_out)
    s = sigma0 / math.sqrt(n_in)
    return {"w_mu": w, "b_mu": b, "w_sigma": np.full((n_out, n_in), s), "b_sigma": np.full(n_out, s)}


def _layer_names(params, prefix):
    out = []
    i = 0
    while f"{prefix}.{i}.w" in params or f"{prefix}.{i}.w_mu" in params:
        out.append(f"{prefix}.{i}")
        i += 1
    return out


@dataclass
class NoisyLayerParams:
    w_mu: np.ndarray
    w_sigma: np.ndarray
    b_mu: np.ndarray
    b_sigma: np.ndarray


def scale_noise(u):
    u = np.asarray(u, dtype=np.float64)
    return np.sign(u) * np.sqrt(np.abs(u))


def factorized_noise(rng: Prng, n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray]:
    eps_in = scale_noise(rng.normal_array(n_in))
    eps_out = scale_noise(rng.normal_array(n_out))
    return np.outer(eps_out, eps_in), eps_out


def noisy_forward(layer, x, noise):
    """``(mu_w + sigma_w * eps_w) x + (mu_b + sigma_b * eps_b)``.

    ``layer`` is a :class:`NoisyLayerParams` or a mapping with the same keys
    (values may be tape variables); ``noise`` is ``(eps_w, eps_b)``.
    """
    get = layer.__getitem__ if isinstance(layer, dict) else lambda k: getattr(layer, k)
    eps_w, eps_b = noise
    w = ad.add(get("w_mu"), ad.mul(get("w_sigma"), eps_w))
    b = ad.add(get("b_mu"), ad.mul(get("b_sigma"), eps_b))
    return ad.linear(x, w, b)


def dueling_aggregate(v, adv):
    """``v + adv - mean(adv)`` along the action axis."""
    return ad.sub(ad.add(v, adv), ad.mean(adv, axis=-1, keepdims=True))


class DualNetwork:
    """Behavior and target parameter sets for any of the agent variants."""

    def __init__(self, spec: NetworkSpec, params: dict[str, np.ndarray], target: dict[str, np.ndarray] | None = None):
        self.spec = spec
        # flat storage ordered [pembed, pref | embed | q] so that both phi and
        # theta are contiguous slices; the dict entries are views into it
        order = ([n for n in params if n.startswith("pembed.")] + [n for n in params if n.startswith("pref.")]
                 + [n for n in params if n.startswith("embed.")] + [n for n in params if n.startswith("q.")])
        if len(order) != len(params):
            raise ValueError("unrecognized parameter names")
        self._order = order
        self._shapes = {n: np.shape(params[n]) for n in order}
        self.flat = np.concatenate([np.asarray(params[n], dtype=np.float64).ravel() for n in order])
        self.params = self._views(self.flat)
        source = params if target is None else target
        self.target_flat = np.concatenate([np.asarray(source[n], dtype=np.float64).ravel() for n in order])
        self.target = self._views(self.target_flat)
        self.theta_names = [n for n in order if n.startswith(("embed.", "q."))]
        self.phi_names = [n for n in order if n.startswith(("pembed.", "pref."))]
        if spec.preference and spec.share_embedding:
            self.phi_names = self.phi_names + [n for n in order if n.startswith("embed.")]
        self._slices = {}
        for group, names in (("theta", self.theta_names), ("phi", self.phi_names)):
            if names:
                lo = self._offsets[names[0]][0]
                hi = self._offsets[names[-1]][1]
                self._slices[group] = slice(lo, hi)
        self.noisy_layers = list(_layer_names(params, "q")) if spec.noisy else []
        self._emb = _layer_names(params, "embed")

    def _views(self, flat):
        views, offsets, off = {}, {}, 0
        for n in self._order:
            shape = self._shapes[n]
            size = int(np.prod(shape))
            views[n] = flat[off:off + size].reshape(shape)
            offsets[n] = (off, off + size)
            off += size
        self._offsets = offsets
        return views

    def flat_view(self, group: str) -> np.ndarray:
        """Contiguous slice of the behavior parameters for ``theta`` or ``phi``."""
        return self.flat[self._slices[group]]

    def flat_grad(self, grads: dict[str, np.ndarray], group: str) -> np.ndarray:
        names = self.theta_names if group == "theta" else self.phi_names
        return np.concatenate([grads[n].ravel() for n in names])

    # construction -------------------------------------------------------
    @classmethod
    def build(cls, spec: NetworkSpec, rng_q: Prng, rng_pref: Prng | None = None) -> "DualNetwork":
        """Fresh fan-in-uniform init; Q and preference params use separate streams."""
        params: dict[str, np.ndarray] = {}
        width = spec.obs_dim
        for i, h in enumerate(spec.embed_sizes):
            params[f"embed.{i}.w"], params[f"embed.{i}.b"] = _dense_init(rng_q, width, h)
            width = h
        trunk = width
        for i, h in enumerate(spec.head_hidden):
            cls._add_head_layer(params, f"q.{i}", rng_q, width, h, spec)
            width = h
        if spec.dueling:
            params["q.value.w"], params["q.value.b"] = _dense_init(rng_q, width, 1)
            params["q.adv.w"], params["q.adv.b"] = _dense_init(rng_q, width, spec.n_actions)
        else:
            cls._add_head_layer(params, f"q.{len(spec.head_hidden)}", rng_q, width, spec.n_actions, spec)
        if spec.preference:
            rng_pref = rng_pref if rng_pref is not None else rng_q
            width = spec.obs_dim
            if not spec.share_embedding:
                for i, h in enumerate(spec.embed_sizes):
                    params[f"pembed.{i}.w"], params[f"pembed.{i}.b"] = _dense_init(rng_pref, width, h)
                    width = h
            else:
                width = trunk
            sizes = list(spec.head_hidden) + [spec.n_actions]
            for i, h in enumerate(sizes):
                params[f"pref.{i}.w"], params[f"pref.{i}.b"] = _dense_init(rng_pref, width, h)
                width = h
        return cls(spec, params)

    @staticmethod
    def _add_head_layer(params, name, rng, n_in, n_out, spec):
        if spec.noisy:
            for k, v in _noisy_init(rng, n_in, n_out, spec.sigma0).items():
                params[f"{name}.{k}"] = v
        else:
            params[f"{name}.w"], params[f"{name}.b"] = _dense_init(rng, n_in, n_out)

    # forward passes (arrays or tape variables) ----------------------------
    def sample_noise(self, rng: Prng) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        noise = {}
        for name in self.noisy_layers:
            n_out, n_in = self.params[f"{name}.w_mu"].shape
            noise[name] = factorized_noise(rng, n_in, n_out)
        return noise

    def zero_noise(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {n: (np.zeros_like(self.params[f"{n}.w_mu"]), np.zeros_like(self.params[f"{n}.b_mu"]))
                for n in self.noisy_layers}

    def _check_input(self, x):
        width = np.shape(ad.value(x))[-1]
        if width != self.spec.obs_dim:
            raise ValueError(f"state width {width} does not match network input {self.spec.obs_dim}")

    @staticmethod
    def _trunk(p, prefix, x, names):
        h = x
        for name in names:
            h = ad.relu(ad.linear(h, p[f"{name}.w"], p[f"{name}.b"]))
        return h

    def embed(self, p, x, prefix="embed"):
        names = self._emb if prefix == "embed" else [n.replace("embed", prefix, 1) for n in self._emb]
        return self._trunk(p, prefix, x, names)

    def q_head(self, p, h, noise=None):
        spec = self.spec
        n_hidden = len(spec.head_hidden)
        for i in range(n_hidden + (0 if spec.dueling else 1)):
            name = f"q.{i}"
            if spec.noisy:
                nz = noise[name] if noise is not None else self.zero_noise()[name]
                layer = {k: p[f"{name}.{k}"] for k in ("w_mu", "w_sigma", "b_mu", "b_sigma")}
                h = noisy_forward(layer, h, nz)
            else:
                h = ad.linear(h, p[f"{name}.w"], p[f"{name}.b"])
            if i < n_hidden:
                h = ad.relu(h)
        if spec.dueling:
            v = ad.linear(h, p["q.value.w"], p["q.value.b"])
            adv = ad.linear(h, p["q.adv.w"], p["q.adv.b"])
            h = dueling_aggregate(v, adv)
        return h

    def pref_head(self, p, h):
        n = len(self.spec.head_hidden) + 1
        for i in range(n):
            h = ad.linear(h, p[f"pref.{i}.w"], p[f"pref.{i}.b"])
            if i < n - 1:
                h = ad.relu(h)
        return h

    def q_forward(self, p, x, noise=None):
        self._check_input(x)
        return self.q_head(p, self.embed(p, x), noise)

    def logits_forward(self, p, x):
        self._check_input(x)
        if not self.spec.preference:
            raise ValueError("network has no preference branch")
        h = self.embed(p, x) if self.spec.share_embedding else self.embed(p, x, "pembed")
        return self.pref_head(p, h)

    def forward_both(self, p, x, noise=None):
        """Q values and preference logits, sharing the trunk pass when possible."""
        self._check_input(x)
        h = self.embed(p, x)
        q = self.q_head(p, h, noise)
        hp = h if self.spec.share_embedding else self.embed(p, x, "pembed")
        return q, self.pref_head(p, hp)

    # bookkeeping --------------------------------------------------------
    def sync_target(self) -> None:
        self.target_flat[...] = self.flat

    def group(self, names) -> dict[str, np.ndarray]:
        return {n: self.params[n] for n in names}

    def copy(self) -> "DualNetwork":
        return DualNetwork(self.spec, self.params, self.target)


def q_values(net: DualNetwork, state, use_target: bool = False, noise=None) -> np.ndarray:
    p = net.target if use_target else net.params
    q = net.q_forward(p, np.asarray(state, dtype=np.float64), noise)
    if not np.all(np.isfinite(q)):
        raise FloatingPointError("non-finite Q values")
    return q


def preference(net: DualNetwork, state) -> np.ndarray:
    return softmax(net.logits_forward(net.params, np.asarray(state, dtype=np.float64)))


def sync_target(net: DualNetwork) -> None:
    net.sync_target()


# checkpoints --------------------------------------------------------------

def _pack(d: dict[str, np.ndarray]) -> dict:
    return {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in d.items()}


def save_checkpoint(net: DualNetwork, path, meta: dict | None = None) -> None:
    record = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": net.spec.to_dict(),
        "meta": meta or {},
        "params": _pack(net.params),
        "target": _pack(net.target),
    }
    Path(path).write_text(json.dumps(record))


def load_checkpoint(path) -> tuple[DualNetwork, dict]:
    record = json.loads(Path(path).read_text())
    if record.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if record.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {record.get('version')}")
    spec = NetworkSpec.from_dict(record["spec"])
    reference = DualNetwork.build(spec, Prng(0), Prng(1))

    def unpack(blob):
        out = {}
        if set(blob) != set(reference.params):
            missing = set(reference.params) ^ set(blob)
            raise ValueError(f"{path}: parameter names do not match the spec ({sorted(missing)[:4]} ...)")
        for k, entry in blob.items():
            arr = np.array(entry["data"], dtype=np.float64)
            shape = tuple(entry["shape"])
            if shape != reference.params[k].shape or arr.size != int(np.prod(shape)):
                raise ValueError(f"{path}: {k} has shape {shape}, expected {reference.params[k].shape}")
            out[k] = arr.reshape(shape)
        return out

    return DualNetwork(spec, unpack(record["params"]), unpack(record["target"])), record.get("meta", {})
