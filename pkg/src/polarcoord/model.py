"""Factored target distributions for coordination of signals and actions.

A model is the chain ``P_S P_{U|S} P_{X|US} P_{Y|X} P_{Shat|UY}`` with a
binary auxiliary ``U``. Alphabets are contiguous integer ranges.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

ROW_TOL = 1e-12
DERIVED_TOL = 1e-10


class ModelError(ValueError):
    """Base class for invalid probability tables."""


class NonStochasticRow(ModelError):
    pass


class NegativeEntry(ModelError):
    pass


class AlphabetMismatch(ModelError):
    pass


def h2(p):
    """Binary entropy in bits, with ``0 log 0 = 0``. Works elementwise."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.where(p > 0, p * np.log2(p), 0.0) - np.where(q > 0, q * np.log2(q), 0.0)
    return out if out.ndim else float(out)


def entropy(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def mutual_information(joint) -> float:
    """``I(A;B)`` in bits for a 2-D joint table ``joint[a, b]``."""
    joint = np.asarray(joint, dtype=float)
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    prod = pa * pb
    mask = joint > 0
    return float((joint[mask] * np.log2(joint[mask] / prod[mask])).sum())


def _check_stochastic(name: str, table: np.ndarray) -> None:
    if np.any(table < 0):
        raise NegativeEntry(f"{name} has negative entries")
    if np.any(table > 1):
        raise ModelError(f"{name} has entries above 1")
    sums = table.sum(axis=-1)
    bad = np.abs(sums - 1.0) > ROW_TOL
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise NonStochasticRow(f"{name} row {tuple(idx)} sums to {sums[tuple(idx)]!r}")


@dataclass(frozen=True, eq=False)
class CoordinationModel:
    """Validated target distribution in factored form.

    Conditional tables are indexed with the conditioning symbols first:
    ``p_u_given_s[s, u]``, ``p_x_given_us[u, s, x]``, ``p_y_given_x[x, y]``,
    ``p_shat_given_uy[u, y, shat]``. Use :func:`build_model` to construct.
    """

    p_s: np.ndarray
    p_u_given_s: np.ndarray
    p_x_given_us: np.ndarray
    p_y_given_x: np.ndarray
    p_shat_given_uy: np.ndarray

    @property
    def n_s(self) -> int:
        return self.p_s.shape[0]

    @property
    def n_x(self) -> int:
        return self.p_y_given_x.shape[0]

    @property
    def n_y(self) -> int:
        return self.p_y_given_x.shape[1]

    @property
    def n_shat(self) -> int:
        return self.p_shat_given_uy.shape[2]

    def joint(self) -> np.ndarray:
        """Full joint ``P[s, u, x, y, shat]``."""
        return np.einsum(
            "s,su,usx,xy,uyt->suxyt",
            self.p_s,
            self.p_u_given_s,
            self.p_x_given_us,
            self.p_y_given_x,
            self.p_shat_given_uy,
        )

    def p_us(self) -> np.ndarray:
        """Joint over ``(U, S)`` as ``[u, s]``."""
        return (self.p_s[:, None] * self.p_u_given_s).T

    def p_uy(self) -> np.ndarray:
        return np.einsum("s,su,usx,xy->uy", self.p_s, self.p_u_given_s, self.p_x_given_us, self.p_y_given_x)

    def p_x(self) -> np.ndarray:
        return np.einsum("s,su,usx->x", self.p_s, self.p_u_given_s, self.p_x_given_us)

    def p_xy(self) -> np.ndarray:
        return self.p_x()[:, None] * self.p_y_given_x

    def target_sxyt(self) -> np.ndarray:
        """Target ``P[s, x, y, shat]`` (``U`` marginalized out)."""
        return self.joint().sum(axis=1)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for t in (self.p_s, self.p_u_given_s, self.p_x_given_us, self.p_y_given_x, self.p_shat_given_uy):
            h.update(np.asarray(t.shape, dtype=np.int64).tobytes())
            h.update(np.ascontiguousarray(t, dtype=np.float64).tobytes())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "p_s": self.p_s.tolist(),
            "p_u_given_s": self.p_u_given_s.tolist(),
            "p_x_given_us": self.p_x_given_us.reshape(-1, self.n_x).tolist(),
            "p_y_given_x": self.p_y_given_x.tolist(),
            "p_shat_given_uy": self.p_shat_given_uy.reshape(-1, self.n_shat).tolist(),
        }


@dataclass(frozen=True)
class DerivedMarginals:
    p_us: np.ndarray
    p_uy: np.ndarray
    p_x: np.ndarray
    p_xy: np.ndarray
    i_us: float
    i_uy: float
    i_xy: float

    @property
    def h_u_given_s(self) -> float:
        return entropy(self.p_us) - entropy(self.p_us.sum(axis=0))

    @property
    def h_u_given_y(self) -> float:
        return entropy(self.p_uy) - entropy(self.p_uy.sum(axis=0))


class RegionCheck(NamedTuple):
    member: bool
    margin: float
    cardinality_bound: int
    cardinality_ok: bool


def build_model(p_s, p_u_given_s, p_x_given_us, p_y_given_x, p_shat_given_uy) -> CoordinationModel:
    """Validate raw tables and return a :class:`CoordinationModel`.

    ``p_x_given_us`` may be given either as a ``(2, |S|, |X|)`` array or as
    ``2|S|`` rows in ``(u, s)`` row-major order; ``p_shat_given_uy`` likewise.
    """
    p_s = np.array(p_s, dtype=float)
    p_u_given_s = np.array(p_u_given_s, dtype=float)
    p_x_given_us = np.array(p_x_given_us, dtype=float)
    p_y_given_x = np.array(p_y_given_x, dtype=float)
    p_shat_given_uy = np.array(p_shat_given_uy, dtype=float)

    if p_s.ndim != 1 or p_s.size == 0:
        raise AlphabetMismatch("p_s must be a non-empty vector")
    n_s = p_s.size
    if p_u_given_s.shape != (n_s, 2):
        raise AlphabetMismatch(f"p_u_given_s must have shape ({n_s}, 2), got {p_u_given_s.shape}")
    if p_y_given_x.ndim != 2:
        raise AlphabetMismatch("p_y_given_x must be a matrix")
    n_x, n_y = p_y_given_x.shape
    if p_x_given_us.ndim == 2:
        if p_x_given_us.shape != (2 * n_s, n_x):
            raise AlphabetMismatch(f"p_x_given_us must have shape ({2 * n_s}, {n_x}), got {p_x_given_us.shape}")
        p_x_given_us = p_x_given_us.reshape(2, n_s, n_x)
    elif p_x_given_us.shape != (2, n_s, n_x):
        raise AlphabetMismatch(f"p_x_given_us must have shape (2, {n_s}, {n_x}), got {p_x_given_us.shape}")
    if p_shat_given_uy.ndim == 2:
        if p_shat_given_uy.shape[0] != 2 * n_y:
            raise AlphabetMismatch(f"p_shat_given_uy must have {2 * n_y} rows, got {p_shat_given_uy.shape[0]}")
        p_shat_given_uy = p_shat_given_uy.reshape(2, n_y, -1)
    elif p_shat_given_uy.ndim != 3 or p_shat_given_uy.shape[:2] != (2, n_y):
        raise AlphabetMismatch(f"p_shat_given_uy must have shape (2, {n_y}, |Shat|), got {p_shat_given_uy.shape}")

    _check_stochastic("p_s", p_s)
    _check_stochastic("p_u_given_s", p_u_given_s)
    _check_stochastic("p_x_given_us", p_x_given_us)
    _check_stochastic("p_y_given_x", p_y_given_x)
    _check_stochastic("p_shat_given_uy", p_shat_given_uy)

    tables = [p_s, p_u_given_s, p_x_given_us, p_y_given_x, p_shat_given_uy]
    for t in tables:
        t.setflags(write=False)
    return CoordinationModel(*tables)


def model_from_dict(d: dict) -> CoordinationModel:
    return build_model(d["p_s"], d["p_u_given_s"], d["p_x_given_us"], d["p_y_given_x"], d["p_shat_given_uy"])


def derive_marginals(model: CoordinationModel) -> DerivedMarginals:
    p_us = model.p_us()
    p_uy = model.p_uy()
    p_xy = model.p_xy()
    return DerivedMarginals(
        p_us=p_us,
        p_uy=p_uy,
        p_x=model.p_x(),
        p_xy=p_xy,
        i_us=mutual_information(p_us),
        i_uy=mutual_information(p_uy),
        i_xy=mutual_information(p_xy),
    )


def check_region_membership(model: CoordinationModel) -> RegionCheck:
    """Test ``I(U;S) <= I(U;Y)``; margin is ``I(U;Y) - I(U;S)`` in bits."""
    dm = derive_marginals(model)
    margin = dm.i_uy - dm.i_us
    bound = model.n_s * model.n_x * model.n_y * model.n_shat + 1
    # Exact ties (e.g. noiseless identity pipelines) must not fail on rounding.
    return RegionCheck(margin >= -DERIVED_TOL, margin, bound, 2 <= bound)


# Reference models ----------------------------------------------------------

def _bsc(p: float) -> list[list[float]]:
    return [[1 - p, p], [p, 1 - p]]


def bsc_source_model(source_flip: float, channel_flip: float) -> CoordinationModel:
    """S uniform, ``U = S xor Bern(source_flip)``, ``X = U``, BSC channel, ``Shat = U``."""
    eye = [[1.0, 0.0], [0.0, 1.0]]
    return build_model(
        p_s=[0.5, 0.5],
        p_u_given_s=_bsc(source_flip),
        p_x_given_us=[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]],
        p_y_given_x=_bsc(channel_flip),
        p_shat_given_uy=[eye[0], eye[0], eye[1], eye[1]],
    )


def reference_model() -> CoordinationModel:
    """The model used throughout the acceptance experiments (margin ~0.21 bits)."""
    return bsc_source_model(0.11, 0.05)


def identity_model() -> CoordinationModel:
    """``Shat = U = S`` uniform over a noiseless binary channel."""
    return bsc_source_model(0.0, 0.0)
