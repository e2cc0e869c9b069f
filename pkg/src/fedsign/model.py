"""Small forecasting models with exact hand-derived gradients.

Two architectures: ``linear_ar`` (ŷ = w·x + b) and a one-hidden-layer tanh
``mlp`` (ŷ = v·tanh(Ux + c) + b). Parameters live in a flat vector with a
named segment layout, which is the single currency exchanged between
clients and the control centre.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

LINEAR_AR = "linear_ar"
MLP = "mlp"


@dataclass(frozen=True)
class ModelArch:
    kind: str
    input_dim: int
    hidden_dim: int | None = None

    def __post_init__(self):
        if self.kind not in (LINEAR_AR, MLP):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if self.kind == MLP and (self.hidden_dim is None or self.hidden_dim < 1):
            raise ValueError("mlp requires a positive hidden_dim")


# layout: tuple of (name, offset, shape)
Layout = tuple[tuple[str, int, tuple[int, ...]], ...]


def arch_layout(arch: ModelArch) -> Layout:
    w = arch.input_dim
    if arch.kind == LINEAR_AR:
        return (("w", 0, (w,)), ("b", w, (1,)))
    h = arch.hidden_dim
    off = 0
    layout = []
    for name, shape in (("U", (h, w)), ("c", (h,)), ("v", (h,)), ("b", (1,))):
        layout.append((name, off, shape))
        off += int(np.prod(shape))
    return tuple(layout)


def layout_dim(layout: Layout) -> int:
    name, off, shape = layout[-1]
    return off + int(np.prod(shape))


@dataclass(frozen=True)
class ParamVector:
    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1:
            raise ValueError("parameter vector must be one-dimensional")
        if layout_dim(self.layout) != len(vals):
            raise ValueError("layout does not tile the vector")
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite parameter values")

    @property
    def dim(self) -> int:
        return len(self.values)

    def segment(self, name: str) -> np.ndarray:
        for seg_name, off, shape in self.layout:
            if seg_name == name:
                return self.values[off : off + int(np.prod(shape))].reshape(shape)
        raise KeyError(name)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values, self.layout)


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray   # (b, W)
    targets: np.ndarray  # (b,)

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs/targets row count mismatch")
        if self.inputs.shape[0] < 1:
            raise ValueError("batch must hold at least one sample")


def init_params(arch: ModelArch, seed: int) -> ParamVector:
    """Glorot-uniform weights for the mlp, zeros for linear_ar; biases zero."""
    layout = arch_layout(arch)
    values = np.zeros(layout_dim(layout))
    if arch.kind == MLP:
        rng = np.random.default_rng(seed)
        w, h = arch.input_dim, arch.hidden_dim
        pv = ParamVector(values, layout)
        lim_u = np.sqrt(6.0 / (w + h))
        lim_v = np.sqrt(6.0 / (h + 1))
        pv.segment("U")[:] = rng.uniform(-lim_u, lim_u, size=(h, w))
        pv.segment("v")[:] = rng.uniform(-lim_v, lim_v, size=h)
        return pv
    return ParamVector(values, layout)


def _check_inputs(arch: ModelArch, inputs: np.ndarray):
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != arch.input_dim:
        raise DimensionMismatch(
            f"inputs shape {inputs.shape} incompatible with input_dim {arch.input_dim}"
        )
    return inputs


def forward(params: ParamVector, arch: ModelArch, inputs: np.ndarray) -> np.ndarray:
    inputs = _check_inputs(arch, inputs)
    if arch.kind == LINEAR_AR:
        return inputs @ params.segment("w") + params.segment("b")[0]
    hidden = np.tanh(inputs @ params.segment("U").T + params.segment("c"))
    return hidden @ params.segment("v") + params.segment("b")[0]


def loss_and_grad(params: ParamVector, arch: ModelArch, batch: Batch) -> tuple[float, ParamVector]:
    """MSE loss and its exact analytic gradient, same layout as params."""
    inputs = _check_inputs(arch, batch.inputs)
    targets = np.asarray(batch.targets, dtype=np.float64)
    b = len(targets)
    grad = params.with_values(np.zeros_like(params.values))
    if arch.kind == LINEAR_AR:
        pred = inputs @ params.segment("w") + params.segment("b")[0]
        err = pred - targets
        grad.segment("w")[:] = (2.0 / b) * (inputs.T @ err)
        grad.segment("b")[:] = (2.0 / b) * np.sum(err)
    else:
        u, c = params.segment("U"), params.segment("c")
        v, bias = params.segment("v"), params.segment("b")
        z = inputs @ u.T + c
        a = np.tanh(z)
        pred = a @ v + bias[0]
        err = pred - targets
        d_pred = (2.0 / b) * err
        grad.segment("b")[:] = np.sum(d_pred)
        grad.segment("v")[:] = a.T @ d_pred
        dz = np.outer(d_pred, v) * (1.0 - a * a)
        grad.segment("c")[:] = dz.sum(axis=0)
        grad.segment("U")[:] = dz.T @ inputs
    loss = float(np.mean(err * err))
    return loss, grad


def apply_update(params: ParamVector, direction: ParamVector, lr: float) -> ParamVector:
    if params.layout != direction.layout:
        raise DimensionMismatch("parameter and direction layouts differ")
    if lr <= 0:
        raise ValueError("lr must be positive")
    return params.with_values(params.values - lr * direction.values)


# --- serialization: flat little-endian f64 plus a JSON layout sidecar ---

def params_to_bytes(params: ParamVector) -> bytes:
    return params.values.astype("<f8").tobytes()


def layout_to_json(layout: Layout) -> str:
    return json.dumps(
        [{"name": n, "offset": o, "shape": list(s)} for n, o, s in layout],
        sort_keys=True,
    )


def params_from_bytes(raw: bytes, layout_json: str) -> ParamVector:
    layout = tuple(
        (e["name"], e["offset"], tuple(e["shape"])) for e in json.loads(layout_json)
    )
    values = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return ParamVector(values, layout)


def save_params(params: ParamVector, path):
    with open(path, "wb") as fh:
        fh.write(params_to_bytes(params))
    with open(str(path) + ".layout.json", "w") as fh:
        fh.write(layout_to_json(params.layout))


def load_params(path) -> ParamVector:
    with open(path, "rb") as fh:
        raw = fh.read()
    with open(str(path) + ".layout.json") as fh:
        return params_from_bytes(raw, fh.read())
