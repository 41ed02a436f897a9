"""Single-response partial least squares regression fit by NIPALS.

Model file layout (version 1), all integers and floats little-endian::

    b"CSBCPLS\\n"                       8-byte magic
    uint32  header_length
    header  UTF-8 JSON: {"version": 1, "feature_tag": str, "dims": d,
                         "n_components": a, "n_components_requested": k,
                         "scale": bool}
    float64 y_mean
    float64 x_mean[d]
    float64 x_scale[d]
    float64 W[d, a]      row-major
    float64 P[d, a]      row-major
    float64 q[a]
    float64 B[d]

``B`` is stored rather than recomputed so that a loaded model predicts
bit-identically to the saved one.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import IO

import numpy as np

from csbc.errors import ConfigurationError, DegenerateTargetError, FormatError, InputError

MAGIC = b"CSBCPLS\n"
FORMAT_VERSION = 1

# residual covariance below this ends NIPALS early
COVARIANCE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PlsModel:
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    weights: np.ndarray  # W, (d, a), unit columns
    loadings: np.ndarray  # P, (d, a)
    y_loadings: np.ndarray  # q, (a,)
    coef: np.ndarray  # B, (d,), in raw feature units
    feature_tag: str = "external"
    n_components_requested: int = 0
    scale: bool = False

    def __post_init__(self):
        for name in ("x_mean", "x_scale", "weights", "loadings", "y_loadings", "coef"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dims(self) -> int:
        return self.x_mean.shape[0]

    @property
    def n_components(self) -> int:
        return self.weights.shape[1]

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dims:
            raise InputError(f"expected {self.dims} features, got {x.shape[-1]}")
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite feature values")
        return x

    def predict(self, x) -> float | np.ndarray:
        """``y_mean + (x - x_mean) . B`` for one vector or a matrix of rows."""
        values = getattr(x, "values", x)
        x = self._check(values)
        out = self.y_mean + (x - self.x_mean) @ self.coef
        return float(out) if x.ndim == 1 else out

    def transform(self, x) -> np.ndarray:
        """Latent scores of rows of ``x`` by successive projection and deflation."""
        x = np.atleast_2d(self._check(getattr(x, "values", x)))
        r = (x - self.x_mean) / self.x_scale
        t = np.empty((r.shape[0], self.n_components))
        for a in range(self.n_components):
            t[:, a] = r @ self.weights[:, a]
            r = r - np.outer(t[:, a], self.loadings[:, a])
        return t

    def predict_latent(self, x) -> np.ndarray:
        return self.y_mean + self.transform(x) @ self.y_loadings


def fit(X, y, k: int, scale: bool = False, feature_tag: str = "external") -> PlsModel:
    """Fit a PLS1 model with up to ``k`` components.

    Fewer components are kept when the residual covariance ``X'y`` vanishes;
    the achieved count is ``model.n_components``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise InputError(f"X must be 2-D, got shape {X.shape}")
    n, d = X.shape
    if y.shape[0] != n:
        raise InputError(f"X has {n} rows but y has {y.shape[0]} entries")
    if n < 2:
        raise InputError("need at least 2 samples")
    if not np.all(np.isfinite(X)):
        raise InputError("X contains NaN or infinite values")
    if not np.all(np.isfinite(y)):
        raise InputError("y contains NaN or infinite values")
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= min(n - 1, d):
        raise ConfigurationError(f"n_components must be in [1, {min(n - 1, d)}], got {k!r}")
    if np.ptp(y) == 0.0:
        raise DegenerateTargetError("target is constant; nothing to regress")

    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    if scale:
        x_scale = X.std(axis=0)
        x_scale[x_scale == 0.0] = 1.0
    else:
        x_scale = np.ones(d)
    Xr = (X - x_mean) / x_scale
    yr = y - y_mean

    W, P, q = [], [], []
    for _ in range(k):
        c = Xr.T @ yr
        norm = np.linalg.norm(c)
        if norm < COVARIANCE_TOL:
            break
        w = c / norm
        t = Xr @ w
        tt = t @ t
        p = Xr.T @ t / tt
        qa = (yr @ t) / tt
        Xr = Xr - np.outer(t, p)
        yr = yr - qa * t
        W.append(w)
        P.append(p)
        q.append(qa)

    a = len(W)
    W = np.column_stack(W) if a else np.zeros((d, 0))
    P = np.column_stack(P) if a else np.zeros((d, 0))
    q = np.array(q)
    B = W @ np.linalg.solve(P.T @ W, q) if a else np.zeros(d)
    return PlsModel(
        x_mean=x_mean,
        x_scale=x_scale,
        y_mean=y_mean,
        weights=W,
        loadings=P,
        y_loadings=q,
        coef=B / x_scale,
        feature_tag=feature_tag,
        n_components_requested=int(k),
        scale=bool(scale),
    )


def predict(model: PlsModel, x) -> float:
    return model.predict(x)


def r_squared(model: PlsModel, X, y) -> float:
    y = np.asarray(y, dtype=np.float64)
    resid = y - model.predict(np.asarray(X, dtype=np.float64))
    return 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())


# ---------------------------------------------------------------------------
# serialization


def dumps(model: PlsModel) -> bytes:
    header = json.dumps(
        {
            "version": FORMAT_VERSION,
            "feature_tag": model.feature_tag,
            "dims": model.dims,
            "n_components": model.n_components,
            "n_components_requested": model.n_components_requested,
            "scale": model.scale,
        },
        sort_keys=True,
    ).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(header)), header, struct.pack("<d", model.y_mean)]
    for arr in (model.x_mean, model.x_scale, model.weights, model.loadings, model.y_loadings, model.coef):
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def loads(data: bytes) -> PlsModel:
    if not data.startswith(MAGIC):
        raise FormatError("not a PLS model file (bad magic)")
    pos = len(MAGIC)
    if len(data) < pos + 4:
        raise FormatError("truncated model file (header length)")
    (hlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if len(data) < pos + hlen:
        raise FormatError("truncated model file (header)")
    try:
        header = json.loads(data[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt model header: {exc}") from None
    pos += hlen
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version!r} (expected {FORMAT_VERSION})")
    try:
        d = int(header["dims"])
        a = int(header["n_components"])
        tag = str(header["feature_tag"])
        k = int(header["n_components_requested"])
        scale = bool(header["scale"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"incomplete model header: {exc}") from None

    n_floats = 1 + d + d + d * a + d * a + a + d
    if len(data) - pos != 8 * n_floats:
        raise FormatError(f"model payload has {len(data) - pos} bytes, expected {8 * n_floats}")
    flat = np.frombuffer(data, dtype="<f8", count=n_floats, offset=pos).astype(np.float64)
    sizes = [1, d, d, d * a, d * a, a, d]
    chunks = np.split(flat, np.cumsum(sizes)[:-1])
    return PlsModel(
        x_mean=chunks[1],
        x_scale=chunks[2],
        y_mean=float(chunks[0][0]),
        weights=chunks[3].reshape(d, a),
        loadings=chunks[4].reshape(d, a),
        y_loadings=chunks[5],
        coef=chunks[6],
        feature_tag=tag,
        n_components_requested=k,
        scale=scale,
    )


def save_model(model: PlsModel, sink: IO[bytes] | None = None) -> bytes:
    data = dumps(model)
    if sink is not None:
        sink.write(data)
    return data


def load_model(source: IO[bytes] | bytes) -> PlsModel:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return loads(bytes(source))
    return loads(source.read())


def save_model_file(model: PlsModel, path) -> None:
    with open(path, "wb") as fh:
        save_model(model, fh)


def load_model_file(path) -> PlsModel:
    with open(path, "rb") as fh:
        return load_model(fh)


__all__ = [
    "PlsModel",
    "fit",
    "predict",
    "r_squared",
    "save_model",
    "load_model",
    "save_model_file",
    "load_model_file",
    "dumps",
    "loads",
]
