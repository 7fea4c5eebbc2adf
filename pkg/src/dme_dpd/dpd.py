"""Memory-polynomial predistorter with an optional bias term.

``u(n) = sum_k sum_m a[k, m] * x(n-m) * |x(n-m)|**k  (+ b)``

Coefficients are flattened k-major, m-minor, with the bias last. That order
is shared by the basis matrix, the least-squares solver, and the JSON form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .waveform import SampledWaveform

Variant = Literal["mp", "mp_bias"]
PadPolicy = Literal["zero", "replicate"]

DEFAULT_ORDER = 2
DEFAULT_MEMORY = 7


class ModelError(ValueError):
    """Raised for malformed predistorter models or unfittable data."""


@dataclass(frozen=True, eq=False)
class PredistorterModel:
    """Memory polynomial coefficients.

    Attributes:
        coeffs: ``(K, M)`` array; row k weights ``x|x|**k``, column m the delay.
        bias: Constant offset for ``mp_bias``; ``None`` for ``mp``.
        variant: ``mp`` or ``mp_bias``.
    """

    coeffs: np.ndarray
    bias: float | None = None
    variant: Variant = "mp"

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float, copy=True)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ModelError(f"coeffs must be a nonempty 2-D array, got shape {c.shape}")
        if self.variant not in ("mp", "mp_bias"):
            raise ModelError(f"unknown variant {self.variant!r}")
        if self.variant == "mp" and self.bias is not None:
            raise ModelError("mp models carry no bias")
        if self.variant == "mp_bias" and self.bias is None:
            raise ModelError("mp_bias models need a bias")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        if self.bias is not None:
            object.__setattr__(self, "bias", float(self.bias))

    @property
    def nonlinearity_order(self) -> int:
        return self.coeffs.shape[0]

    @property
    def memory_depth(self) -> int:
        return self.coeffs.shape[1]

    @classmethod
    def identity(
        cls,
        nonlinearity_order: int = DEFAULT_ORDER,
        memory_depth: int = DEFAULT_MEMORY,
        variant: Variant = "mp",
    ) -> PredistorterModel:
        """Pass-through model with ``a[0, 0] = 1`` and zero bias."""
        _check_dims(nonlinearity_order, memory_depth)
        coeffs = np.zeros((nonlinearity_order, memory_depth))
        coeffs[0, 0] = 1.0
        return cls(coeffs, 0.0 if variant == "mp_bias" else None, variant)

    @classmethod
    def from_vector(
        cls, vec, nonlinearity_order: int, memory_depth: int, variant: Variant
    ) -> PredistorterModel:
        vec = np.asarray(vec, dtype=float).reshape(-1)
        n = nonlinearity_order * memory_depth
        expected = n + (variant == "mp_bias")
        if vec.size != expected:
            raise ModelError(f"expected {expected} coefficients, got {vec.size}")
        bias = float(vec[n]) if variant == "mp_bias" else None
        return cls(vec[:n].reshape(nonlinearity_order, memory_depth), bias, variant)

    def to_vector(self) -> np.ndarray:
        vec = self.coeffs.reshape(-1)
        if self.variant == "mp_bias":
            vec = np.append(vec, self.bias)
        return vec.copy()

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "K": self.nonlinearity_order,
            "M": self.memory_depth,
            "coeffs": self.coeffs.reshape(-1).tolist(),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, data: dict) -> PredistorterModel:
        try:
            k, m = int(data["K"]), int(data["M"])
            coeffs = np.asarray(data["coeffs"], dtype=float).reshape(k, m)
            return cls(coeffs, data.get("bias"), data["variant"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed model record: {exc}") from exc


def _check_dims(nonlinearity_order: int, memory_depth: int) -> None:
    if nonlinearity_order < 1 or memory_depth < 1:
        raise ModelError("nonlinearity order and memory depth must be >= 1")


def _delayed(x: np.ndarray, m: int, pad: PadPolicy) -> np.ndarray:
    if m == 0:
        return x
    fill = 0.0 if pad == "zero" else x[0]
    if m >= x.size:
        return np.full_like(x, fill)
    return np.concatenate([np.full(m, fill), x[:-m]])


def basis_matrix(
    x,
    nonlinearity_order: int,
    memory_depth: int,
    variant: Variant = "mp",
    pad: PadPolicy = "zero",
) -> np.ndarray:
    """Regressor matrix on a raw sample array. See :func:`build_basis`."""
    _check_dims(nonlinearity_order, memory_depth)
    x = np.asarray(x, dtype=float).reshape(-1)
    ncols = nonlinearity_order * memory_depth + (variant == "mp_bias")
    out = np.empty((x.size, ncols))
    delayed = [_delayed(x, m, pad) for m in range(memory_depth)]
    col = 0
    for k in range(nonlinearity_order):
        for m in range(memory_depth):
            xm = delayed[m]
            out[:, col] = xm * np.abs(xm) ** k
            col += 1
    if variant == "mp_bias":
        out[:, col] = 1.0
    return out


def build_basis(
    x: SampledWaveform,
    nonlinearity_order: int,
    memory_depth: int,
    variant: Variant = "mp",
    pad: PadPolicy = "zero",
) -> np.ndarray:
    """Regressors ``x(n-m)|x(n-m)|**k`` in k-major, m-minor order.

    An all-ones column is appended for ``mp_bias``. Samples before the record
    are zero unless ``pad='replicate'`` is requested.

    Raises:
        ModelError: If an order or depth is below 1, or ``K*M`` is not smaller
            than the record length.
    """
    if nonlinearity_order * memory_depth >= len(x):
        raise ModelError("K*M must be smaller than the number of samples")
    return basis_matrix(x.samples, nonlinearity_order, memory_depth, variant, pad)


def apply_predistorter(
    model: PredistorterModel, x: SampledWaveform, pad: PadPolicy = "zero"
) -> SampledWaveform:
    """Evaluate the memory polynomial on ``x``. The output may go negative."""
    xs = x.samples
    u = np.zeros(xs.size)
    for m in range(model.memory_depth):
        xm = _delayed(xs, m, pad)
        mag = np.abs(xm)
        for k in range(model.nonlinearity_order):
            u += model.coeffs[k, m] * (xm * mag**k)
    if model.variant == "mp_bias":
        u += model.bias
    return x.with_samples(u, envelope=False)


def solve_least_squares(
    inputs,
    target,
    nonlinearity_order: int,
    memory_depth: int,
    variant: Variant = "mp",
    rcond: float | None = None,
    pad: PadPolicy = "zero",
    anchor: PredistorterModel | None = None,
) -> PredistorterModel:
    """Array-level core of :func:`fit_least_squares`."""
    inputs = np.asarray(inputs, dtype=float).reshape(-1)
    target = np.asarray(target, dtype=float).reshape(-1)
    if inputs.size != target.size:
        raise ModelError(f"length mismatch: input {inputs.size}, target {target.size}")
    if variant == "mp" and not np.any(inputs):
        raise ModelError("all-zero input cannot be fit without a bias term")
    design = basis_matrix(inputs, nonlinearity_order, memory_depth, variant, pad)
    # SVD-based lstsq: minimum-norm solution, singular values below
    # rcond * s_max treated as zero. With an anchor, the norm is measured from
    # the anchor's coefficients, so truncated directions keep their values.
    start = np.zeros(design.shape[1]) if anchor is None else anchor.to_vector()
    if start.size != design.shape[1]:
        raise ModelError("anchor model does not match K, M and variant")
    delta, *_ = np.linalg.lstsq(design, target - design @ start, rcond=rcond)
    vec = start + delta
    return PredistorterModel.from_vector(vec, nonlinearity_order, memory_depth, variant)


def fit_least_squares(
    input: SampledWaveform,
    target: SampledWaveform,
    nonlinearity_order: int = DEFAULT_ORDER,
    memory_depth: int = DEFAULT_MEMORY,
    variant: Variant = "mp",
    rcond: float | None = None,
    pad: PadPolicy = "zero",
    anchor: PredistorterModel | None = None,
) -> PredistorterModel:
    """Least-squares memory polynomial mapping ``input`` to ``target``.

    Args:
        input: Regressor waveform.
        target: Desired output, same length as ``input``.
        nonlinearity_order: K.
        memory_depth: M.
        variant: ``mp`` or ``mp_bias``.
        rcond: Relative singular-value cutoff. ``None`` keeps every direction
            above machine precision.
        pad: History policy before the first sample.
        anchor: Model whose coefficients the minimum-norm solution is
            measured from. ``None`` measures from zero.

    Raises:
        ModelError: On length mismatch or an all-zero input for ``mp``.
    """
    return solve_least_squares(
        input.samples,
        target.samples,
        nonlinearity_order,
        memory_depth,
        variant,
        rcond,
        pad,
        anchor,
    )
