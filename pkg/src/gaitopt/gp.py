"""Gaussian-process surrogates with simulation-informed kernels.

Kernel family: squared-exponential (SE-ARD) on raw controller parameters,
SE on a feature transform phi, and two mismatch-adjusted variants that fold
a learned simulation-vs-hardware feature mismatch into the kernel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

VARIANTS = ("se", "transform", "adjusted", "adjusted_v2")
JITTERS = (0.0, 1.0e-8, 1.0e-6, 1.0e-4)
HYPER_BOUNDS = (1.0e-3, 1.0e3)

# fixed mismatch-GP hyperparameters: too few hardware points to fit these
MISMATCH_ELL = 0.3
MISMATCH_SIGNAL_VAR = 1.0
MISMATCH_NOISE = 0.1


@dataclass
class GPHyper:
    """SE-kernel hyperparameters; defaults follow the reference setup.

    lengthscales covers the transform block; ell2 covers the mismatch block
    of the adjusted kernel (unused by the other variants).
    """

    signal_var: float = 1.0
    lengthscales: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    noise: float = 0.1
    mean_offset: float = 0.0
    ell2: Optional[np.ndarray] = None

    def __post_init__(self):
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, float))
        if self.ell2 is not None:
            self.ell2 = np.atleast_1d(np.asarray(self.ell2, float))
        if self.signal_var <= 0 or self.noise <= 0 or np.any(self.lengthscales <= 0):
            raise ValueError("signal variance, noise and length scales must be positive")
        if self.ell2 is not None and np.any(self.ell2 <= 0):
            raise ValueError("mismatch-block length scales must be positive")

    def copy(self) -> "GPHyper":
        return GPHyper(self.signal_var, self.lengthscales.copy(), self.noise,
                       self.mean_offset,
                       None if self.ell2 is None else self.ell2.copy())


class MismatchModel:
    """Per-dimension GPs over the simulation-vs-hardware feature mismatch.

    Each output dimension of the transform gets an independent SE-kernel GP
    with fixed hyperparameters and zero prior mean, so the predicted
    mismatch is 0 everywhere until data arrives.
    """

    def __init__(self, input_dim: int, output_dim: int):
        self.input_dim = input_dim
        self.output_dim = output_dim
        self.X = np.zeros((0, input_dim))
        self.D = np.zeros((0, output_dim))
        self.version = 0
        self._solve = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def add(self, x, phi_sim, phi_hw) -> None:
        x = np.asarray(x, float).reshape(-1)
        phi_sim = np.atleast_1d(np.asarray(phi_sim, float))
        phi_hw = np.atleast_1d(np.asarray(phi_hw, float))
        if x.shape != (self.input_dim,) or phi_sim.shape != (self.output_dim,) \
                or phi_hw.shape != (self.output_dim,):
            raise ValueError("mismatch datum has wrong dimension")
        if not (np.all(np.isfinite(phi_sim)) and np.all(np.isfinite(phi_hw))):
            raise ValueError("transform values must be finite")
        self.X = np.vstack([self.X, x])
        self.D = np.vstack([self.D, phi_sim - phi_hw])
        self.version += 1
        self._solve = None

    def _alpha(self):
        if self._solve is None:
            K = _se_gram(self.X, self.X, MISMATCH_SIGNAL_VAR,
                         np.full(self.input_dim, MISMATCH_ELL))
            K[np.diag_indices_from(K)] += MISMATCH_NOISE ** 2
            self._solve = np.linalg.solve(K, self.D)
        return self._solve

    def predict(self, X) -> np.ndarray:
        """Posterior mean of the mismatch, rows per query point."""
        X = np.atleast_2d(np.asarray(X, float))
        if self.n == 0:
            return np.zeros((X.shape[0], self.output_dim))
        Ks = _se_gram(X, self.X, MISMATCH_SIGNAL_VAR,
                      np.full(self.input_dim, MISMATCH_ELL))
        return Ks @ self._alpha()


def mismatch_update(mm: MismatchModel, x, phi_sim, phi_hw) -> MismatchModel:
    """Append one hardware-evaluated mismatch datum and refit."""
    mm.add(x, phi_sim, phi_hw)
    return mm


@dataclass
class KernelSpec:
    """Kernel variant + transform + mismatch-model handles + hyperparameters."""

    variant: str = "se"
    transform: Optional[Callable] = None
    mismatch: Optional[MismatchModel] = None
    hyper: GPHyper = field(default_factory=GPHyper)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.variant != "se" and self.transform is None:
            raise ValueError(f"{self.variant} kernel needs a transform")
        if self.variant in ("adjusted", "adjusted_v2") and self.mismatch is None:
            raise ValueError(f"{self.variant} kernel needs a mismatch model")


def _se_gram(F1, F2, signal_var, ell):
    s1 = F1 / ell
    s2 = F2 / ell
    d2 = np.sum(s1 * s1, 1)[:, None] + np.sum(s2 * s2, 1)[None, :] \
        - 2.0 * s1 @ s2.T
    return signal_var * np.exp(-0.5 * np.maximum(d2, 0.0))


def _apply_transform(transform, X):
    X = np.atleast_2d(X)
    out = np.empty((X.shape[0], 0))
    rows = []
    for i in range(X.shape[0]):
        v = np.atleast_1d(np.asarray(transform(X[i]), float))
        if not np.all(np.isfinite(v)):
            raise ValueError(f"transform produced non-finite output at point "
                             f"{np.round(X[i], 6).tolist()}")
        rows.append(v)
    return np.stack(rows) if rows else out


def _broadcast(ell, dim, what):
    ell = np.atleast_1d(np.asarray(ell, float))
    if ell.shape == (1,):
        return np.full(dim, ell[0])
    if ell.shape != (dim,):
        raise ValueError(f"{what} length scales have dimension {ell.shape[0]}, "
                         f"features have {dim}")
    return ell


def feature_blocks(spec: KernelSpec, X):
    """(feature matrix, matching length-scale vector) for a point batch.

    se: raw parameters. transform: phi(x). adjusted: [phi(x); gbar(x)] with
    stacked scale blocks. adjusted_v2: hardware-adjusted phi(x) - gbar(x).
    """
    X = np.atleast_2d(np.asarray(X, float))
    h = spec.hyper
    if spec.variant == "se":
        return X, _broadcast(h.lengthscales, X.shape[1], "input")
    F = _apply_transform(spec.transform, X)
    ell1 = _broadcast(h.lengthscales, F.shape[1], "transform")
    if spec.variant == "transform":
        return F, ell1
    G = spec.mismatch.predict(X)
    if spec.variant == "adjusted":
        ell2 = _broadcast(h.ell2 if h.ell2 is not None else np.array([1.0]),
                          G.shape[1], "mismatch")
        return np.hstack([F, G]), np.concatenate([ell1, ell2])
    return F - G, ell1  # adjusted_v2


def kernel_gram(spec: KernelSpec, X1, X2=None) -> np.ndarray:
    F1, ell = feature_blocks(spec, X1)
    F2 = F1 if X2 is None else feature_blocks(spec, X2)[0]
    return _se_gram(F1, F2, spec.hyper.signal_var, ell)


def kernel_eval(spec: KernelSpec, x_i, x_j) -> float:
    """Kernel value for one pair of unit-cube points."""
    return float(kernel_gram(spec, np.atleast_2d(x_i), np.atleast_2d(x_j))[0, 0])


def kernel_v2_eval(spec: KernelSpec, x_i, x_j) -> float:
    """Hardware-adjusted-estimate kernel; requires the adjusted_v2 variant."""
    if spec.variant != "adjusted_v2":
        raise ValueError("kernel_v2_eval requires an adjusted_v2 spec")
    return kernel_eval(spec, x_i, x_j)


class GPModel:
    """GP regressor over unit-cube points with a cached Cholesky factor."""

    def __init__(self, spec: KernelSpec, dim: int,
                 mean_fn: Optional[Callable] = None):
        self.spec = spec
        self.dim = dim
        self.mean_fn = mean_fn
        self.X = np.zeros((0, dim))
        self.y = np.zeros(0)
        self._cache = None
        self._cache_key = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def prior_mean(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        base = np.full(X.shape[0], self.spec.hyper.mean_offset)
        if self.mean_fn is not None:
            base = base + np.array([float(self.mean_fn(x)) for x in X])
        return base

    def add(self, x, y: float) -> None:
        x = np.asarray(x, float).reshape(-1)
        if x.shape != (self.dim,):
            raise ValueError("point dimension mismatch")
        self.X = np.vstack([self.X, x])
        self.y = np.append(self.y, float(y))
        self._cache = None

    def set_hyper(self, hyper: GPHyper) -> None:
        self.spec = replace(self.spec, hyper=hyper)
        self._cache = None

    def _key(self):
        mmv = self.spec.mismatch.version if self.spec.mismatch is not None else -1
        return (self.n, id(self.spec.hyper), mmv)

    def _factor(self):
        key = self._key()
        if self._cache is not None and self._cache_key == key:
            return self._cache
        F, ell = feature_blocks(self.spec, self.X)
        K = _se_gram(F, F, self.spec.hyper.signal_var, ell)
        noise_var = self.spec.hyper.noise ** 2
        base = K + noise_var * np.eye(self.n)
        last = None
        for jit in JITTERS:
            try:
                chol = cho_factor(base + jit * np.eye(self.n), lower=True)
                break
            except np.linalg.LinAlgError as e:
                last = e
        else:
            raise np.linalg.LinAlgError(
                f"kernel matrix not positive definite after jitter "
                f"{JITTERS[-1]:g}") from last
        r = self.y - self.prior_mean(self.X)
        alpha = cho_solve(chol, r)
        self._cache = (F, ell, K, chol, alpha, r)
        self._cache_key = key
        return self._cache

    def posterior(self, Xs):
        """(mean, variance) arrays at query points; prior when untrained."""
        Xs = np.atleast_2d(np.asarray(Xs, float))
        mu = self.prior_mean(Xs)
        if self.n == 0:
            return mu, np.full(Xs.shape[0], self.spec.hyper.signal_var)
        F, ell, K, chol, alpha, _ = self._factor()
        Fs, _ = feature_blocks(self.spec, Xs)
        Ks = _se_gram(Fs, F, self.spec.hyper.signal_var, ell)
        mean = mu + Ks @ alpha
        v = cho_solve(chol, Ks.T)
        var = self.spec.hyper.signal_var - np.sum(Ks * v.T, 1)
        var = np.where(var > -1.0e-10, np.maximum(var, 0.0), var)
        if np.any(var < 0):
            raise ValueError("posterior variance below tolerance")
        return mean, var


def gp_posterior(model: GPModel, x_star):
    mean, var = model.posterior(np.atleast_2d(x_star))
    return float(mean[0]), float(var[0])


def _log_hyper_vector(hyper: GPHyper):
    parts = [np.log([hyper.signal_var]), np.log(hyper.lengthscales)]
    n2 = 0
    if hyper.ell2 is not None:
        parts.append(np.log(hyper.ell2))
        n2 = hyper.ell2.shape[0]
    parts.append(np.log([hyper.noise]))
    return np.concatenate(parts), n2


def _hyper_from_vector(theta, template: GPHyper):
    n1 = template.lengthscales.shape[0]
    n2 = template.ell2.shape[0] if template.ell2 is not None else 0
    return GPHyper(
        signal_var=float(np.exp(theta[0])),
        lengthscales=np.exp(theta[1:1 + n1]),
        ell2=np.exp(theta[1 + n1:1 + n1 + n2]) if n2 else None,
        noise=float(np.exp(theta[-1])),
        mean_offset=template.mean_offset)


def log_marginal_likelihood(model: GPModel):
    """(log evidence, gradient w.r.t. log signal variance, log scales, log noise)."""
    if model.n < 1:
        raise ValueError("needs at least one training point")
    F, ell, K, chol, alpha, r = model._factor()
    n = model.n
    noise_var = model.spec.hyper.noise ** 2
    Ky_logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    value = -0.5 * float(r @ alpha) - 0.5 * Ky_logdet - 0.5 * n * np.log(2.0 * np.pi)

    Kinv = cho_solve(chol, np.eye(n))
    A = np.outer(alpha, alpha) - Kinv  # d(evidence)/dKy = A/2
    grads = [0.5 * float(np.sum(A * K))]  # d Ky / d log signal_var = K
    for d in range(F.shape[1]):
        diff2 = (F[:, d][:, None] - F[:, d][None, :]) ** 2 / ell[d] ** 2
        grads.append(0.5 * float(np.sum(A * (K * diff2))))
    grads.append(0.5 * float(np.trace(A)) * 2.0 * noise_var)
    return value, np.array(grads)


def optimize_hypers(model: GPModel, restarts: int = 3, seed: int = 0):
    """Evidence maximization over log-hyperparameters, best of several starts.

    Start 0 is the reference defaults (unit scales and signal, noise 0.1);
    the rest perturb them with a seeded log-normal. Returns (hyper, info);
    on total failure the incoming hyperparameters are kept and flagged.
    """
    if model.n < 2:
        raise ValueError("needs at least two training points")
    template = model.spec.hyper
    defaults = GPHyper(signal_var=1.0,
                       lengthscales=np.ones_like(template.lengthscales),
                       ell2=None if template.ell2 is None
                       else np.ones_like(template.ell2),
                       noise=0.1, mean_offset=template.mean_offset)
    theta0, _ = _log_hyper_vector(defaults)
    rng = np.random.default_rng(seed)
    starts = [theta0] + [theta0 + rng.normal(0.0, 0.5, theta0.shape)
                         for _ in range(max(restarts - 1, 0))]
    lo, hi = np.log(HYPER_BOUNDS[0]), np.log(HYPER_BOUNDS[1])
    incoming = model.spec.hyper

    def objective(theta):
        model.set_hyper(_hyper_from_vector(theta, template))
        try:
            v, g = log_marginal_likelihood(model)
        except np.linalg.LinAlgError:
            return 1.0e10, np.zeros_like(theta)
        return -v, -g

    best = None
    failures = 0
    for th in starts:
        th = np.clip(th, lo, hi)
        try:
            res = minimize(objective, th, jac=True, method="L-BFGS-B",
                           bounds=[(lo, hi)] * th.shape[0])
        except (np.linalg.LinAlgError, ValueError):
            failures += 1
            continue
        if not np.all(np.isfinite(res.x)) or not np.isfinite(res.fun):
            failures += 1
            continue
        if best is None or res.fun < best[0]:
            best = (res.fun, res.x)
    if best is None:
        model.set_hyper(incoming)
        return incoming, {"failed": True, "failures": failures}
    hyper = _hyper_from_vector(best[1], template)
    model.set_hyper(hyper)
    return hyper, {"failed": False, "evidence": -best[0], "failures": failures}


def zscore_transform(transform: Callable, points: np.ndarray):
    """Standardize a transform over a reference point set (e.g. a dataset).

    Returns (wrapped transform, mean, std); degenerate dimensions keep
    std = 1 so constant features stay constant instead of exploding.
    """
    vals = _apply_transform(transform, points)
    mean = vals.mean(0)
    std = vals.std(0)
    std = np.where(std < 1.0e-12, 1.0, std)

    def wrapped(x):
        return (np.atleast_1d(np.asarray(transform(x), float)) - mean) / std

    return wrapped, mean, std


def table_transform(points: np.ndarray, values: np.ndarray):
    """Exact-lookup transform backed by precomputed values at known points."""
    values = np.asarray(values, float)
    if values.ndim == 1:
        values = values[:, None]
    table = {points[i].tobytes(): values[i] for i in range(points.shape[0])}

    def phi(x):
        v = table.get(np.ascontiguousarray(x, float).tobytes())
        if v is None:
            raise KeyError(f"no precomputed transform value for point "
                           f"{np.round(x, 6).tolist()}")
        return v

    return phi


def save_model(model: GPModel, path) -> None:
    """Checkpoint (X, y, hyper, kernel id, mismatch data) as JSON."""
    h = model.spec.hyper
    payload = {
        "variant": model.spec.variant,
        "dim": model.dim,
        "X": model.X.tolist(),
        "y": model.y.tolist(),
        "hyper": {"signal_var": h.signal_var,
                  "lengthscales": h.lengthscales.tolist(),
                  "noise": h.noise, "mean_offset": h.mean_offset,
                  "ell2": None if h.ell2 is None else h.ell2.tolist()},
    }
    mm = model.spec.mismatch
    if mm is not None:
        payload["mismatch"] = {"input_dim": mm.input_dim,
                               "output_dim": mm.output_dim,
                               "X": mm.X.tolist(), "D": mm.D.tolist()}
    with open(path, "w") as f:
        json.dump(payload, f)


def load_model(path, transform: Optional[Callable] = None,
               mean_fn: Optional[Callable] = None) -> GPModel:
    with open(path) as f:
        payload = json.load(f)
    h = payload["hyper"]
    hyper = GPHyper(signal_var=h["signal_var"],
                    lengthscales=np.array(h["lengthscales"]),
                    noise=h["noise"], mean_offset=h["mean_offset"],
                    ell2=None if h["ell2"] is None else np.array(h["ell2"]))
    mm = None
    if "mismatch" in payload:
        m = payload["mismatch"]
        mm = MismatchModel(m["input_dim"], m["output_dim"])
        mm.X = np.array(m["X"]).reshape(-1, m["input_dim"])
        mm.D = np.array(m["D"]).reshape(-1, m["output_dim"])
        mm.version = mm.X.shape[0]
    spec = KernelSpec(variant=payload["variant"], transform=transform,
                      mismatch=mm, hyper=hyper)
    model = GPModel(spec, payload["dim"], mean_fn=mean_fn)
    model.X = np.array(payload["X"]).reshape(-1, payload["dim"])
    model.y = np.array(payload["y"])
    return model
