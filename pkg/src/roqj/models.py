"""Model presets, driving functions, and reference oracles.

Basis convention (qubit): array index 0 is the excited state |1> (Bloch +z),
index 1 is |0>. Pauli-diagonal models store each channel as
(L_k = sigma_k, c_k = gamma_k / 2) so that the generator reproduces

    L_t(rho) = i b(t)/2 [sigma_z, rho] + (1/2) sum_k gamma_k(t) (sigma_k rho sigma_k - rho),

i.e. the config files and closed-form criteria speak the gamma_k language and
the gamma/2 conversion lives only here.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .errors import (
    NonPauliModel,
    NormalizationError,
    SchemaError,
    StepInstability,
)
from .generator import Channel, GeneratorRepresentation
from .linalg import ID2, PAULI_X, PAULI_Y, PAULI_Z

_SQRT2PI = math.sqrt(2.0 * math.pi)


class TimeFunction:
    """A scalar function of time with an optional exact definite integral
    from 0 to t. Both accept scalars or arrays."""

    def __init__(self, fn, integral=None, label="timefn"):
        self._fn = fn
        self._integral = integral
        self.label = label

    def __call__(self, t):
        return self._fn(t)

    @property
    def has_integral(self):
        return self._integral is not None

    def integral(self, t):
        if self._integral is None:
            raise NonPauliModel(f"{self.label} has no closed-form integral")
        return self._integral(t)

    def __repr__(self):
        return f"TimeFunction({self.label})"


def _log_cosh(t):
    t = np.asarray(t, dtype=float)
    return np.abs(t) + np.log1p(np.exp(-2.0 * np.abs(t))) - math.log(2.0)


def as_time_function(x, label="rate"):
    if isinstance(x, TimeFunction):
        return x
    if callable(x):
        return TimeFunction(x, label=label)
    v = float(x)
    return TimeFunction(lambda t, _v=v: _v * np.ones_like(np.asarray(t, dtype=float)),
                        integral=lambda t, _v=v: _v * np.asarray(t, dtype=float),
                        label=f"constant({v})")


def make_rate(preset: str, params: dict | None = None) -> TimeFunction:
    """Named rate presets used in model config files."""
    params = dict(params or {})
    if preset == "constant":
        value = float(params.pop("value"))
        _reject_extra(params, "rate.params")
        return as_time_function(value)
    if preset in ("tanh", "neg_tanh"):
        scale = float(params.pop("scale", 1.0))
        _reject_extra(params, "rate.params")
        sign = -1.0 if preset == "neg_tanh" else 1.0
        return TimeFunction(lambda t, s=sign * scale: s * np.tanh(t),
                            integral=lambda t, s=sign * scale: s * _log_cosh(t),
                            label=f"{preset}(scale={scale})")
    if preset == "neg_half_tanh":
        _reject_extra(params, "rate.params")
        return TimeFunction(lambda t: -0.5 * np.tanh(t),
                            integral=lambda t: -0.5 * _log_cosh(t),
                            label="neg_half_tanh")
    if preset == "table":
        ts = np.asarray(params.pop("times"), dtype=float)
        vs = np.asarray(params.pop("values"), dtype=float)
        _reject_extra(params, "rate.params")
        if ts.ndim != 1 or ts.shape != vs.shape or ts.size < 2 or np.any(np.diff(ts) <= 0):
            raise SchemaError("rate.params", "table needs matching, strictly increasing times")
        return _table_function(ts, vs)
    raise SchemaError("rate.preset", f"unknown rate preset {preset!r}")


def _table_function(ts, vs):
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts))))

    def fn(t):
        return np.interp(t, ts, vs)

    def integral(t):
        # exact integral of the piecewise-linear interpolant, constant
        # extrapolation outside the knots
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 2)
        t0, t1 = ts[idx], ts[idx + 1]
        v0, v1 = vs[idx], vs[idx + 1]
        tc = np.clip(t, ts[0], ts[-1])
        frac = (tc - t0)
        vt = v0 + (v1 - v0) * frac / (t1 - t0)
        inside = cum[idx] + 0.5 * (v0 + vt) * frac
        below = vs[0] * (t - ts[0])
        above = cum[-1] + vs[-1] * (t - ts[-1])
        out = np.where(t < ts[0], below, np.where(t > ts[-1], above, inside))
        return out if out.ndim else float(out)

    return TimeFunction(fn, integral=integral, label="table")


# -- driving -----------------------------------------------------------------

def gaussian_driving(t, mu: float, sigma: float):
    """b(t) = C + int_0^t Omega(s; mu, sigma) ds with C = int_{-inf}^0 Omega,
    which telescopes to the normal CDF at (t - mu)/sigma."""
    if sigma <= 0:
        raise SchemaError("driving.sigma", "sigma must be positive")
    return ndtr((np.asarray(t, dtype=float) - mu) / sigma)


def _gaussian_driving_integral(t, mu, sigma):
    # int Phi(u) du = u Phi(u) + phi(u)
    def g(u):
        return u * ndtr(u) + np.exp(-0.5 * u * u) / _SQRT2PI

    u1 = (np.asarray(t, dtype=float) - mu) / sigma
    u0 = -mu / sigma
    return sigma * (g(u1) - g(u0))


def make_driving(kind: str | None, params: dict | None = None) -> TimeFunction:
    params = dict(params or {})
    if kind in (None, "none"):
        _reject_extra(params, "driving")
        return as_time_function(0.0)
    if kind == "constant":
        b = float(params.pop("b"))
        _reject_extra(params, "driving")
        return as_time_function(b)
    if kind == "gaussian_integral":
        mu = float(params.pop("mu"))
        sigma = float(params.pop("sigma"))
        _reject_extra(params, "driving")
        if sigma <= 0:
            raise SchemaError("driving.sigma", "sigma must be positive")
        return TimeFunction(lambda t: gaussian_driving(t, mu, sigma),
                            integral=lambda t: _gaussian_driving_integral(t, mu, sigma),
                            label=f"gaussian_integral(mu={mu}, sigma={sigma})")
    raise SchemaError("driving.kind", f"unknown driving kind {kind!r}")


# -- the eternal non-Markovian qubit family ----------------------------------

def enm_model(gamma1, gamma2, gamma3, driving=None, name="enm") -> GeneratorRepresentation:
    """Pauli-diagonal qubit generator with optional sigma_z driving.

    The Hamiltonian is H(t) = -b(t)/2 sigma_z, so -i[H, rho] equals the
    +i b/2 [sigma_z, rho] driving term.
    """
    g1 = as_time_function(gamma1, "gamma1")
    g2 = as_time_function(gamma2, "gamma2")
    g3 = as_time_function(gamma3, "gamma3")
    b = as_time_function(0.0) if driving is None else as_time_function(driving, "driving")

    channels = tuple(
        Channel(lindblad=lambda t, _s=s: _s, rate=lambda t, _g=g: 0.5 * float(_g(t)))
        for s, g in ((PAULI_X, g1), (PAULI_Y, g2), (PAULI_Z, g3))
    )

    def hamiltonian(t, _b=b):
        return -0.5 * float(_b(t)) * PAULI_Z

    return GeneratorRepresentation(
        dim=2,
        hamiltonian=hamiltonian,
        channels=channels,
        meta={"model": name, "pauli_rates": (g1, g2, g3), "driving": b},
    )


def pauli_rates(rep: GeneratorRepresentation):
    """The (gamma1, gamma2, gamma3) time functions of a Pauli-diagonal model,
    or None if the representation is not one."""
    return rep.meta.get("pauli_rates")


def driving_of(rep: GeneratorRepresentation) -> TimeFunction:
    return rep.meta.get("driving", as_time_function(0.0))


# -- reference oracles --------------------------------------------------------

def integrate_master_equation(rep: GeneratorRepresentation, rho0: np.ndarray, t_grid) -> np.ndarray:
    """Classic RK4 on d rho/dt = L_t(rho); one step per grid interval."""
    from .generator import generator_apply

    t_grid = np.asarray(t_grid, dtype=float)
    rho = np.asarray(rho0, dtype=complex).copy()
    out = np.empty((t_grid.size, rep.dim, rep.dim), dtype=complex)
    out[0] = rho
    for i in range(t_grid.size - 1):
        t, dt = t_grid[i], t_grid[i + 1] - t_grid[i]
        k1 = generator_apply(rep, t, rho)
        k2 = generator_apply(rep, t + dt / 2, rho + dt / 2 * k1)
        k3 = generator_apply(rep, t + dt / 2, rho + dt / 2 * k2)
        k4 = generator_apply(rep, t + dt, rho + dt * k3)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)
        if drift > 1e-8:
            raise StepInstability(f"trace drifted by {drift:.3e} at t={t_grid[i + 1]:.4f}")
        out[i + 1] = rho
    return out


def enm_analytic_solution(rho0: np.ndarray, t, rep_or_rates, driving=None) -> np.ndarray:
    """Closed-form Bloch solution for Pauli-diagonal models.

    Decay factors are Lambda_x = exp(-int (g2+g3)), Lambda_y = exp(-int (g1+g3)),
    Lambda_z = exp(-int (g1+g2)); driving rotates (x, y) by the accumulated
    angle int b (clockwise, matching the +i b/2 [sigma_z, .] term) and is only
    supported for gamma1 = gamma2.
    """
    if isinstance(rep_or_rates, GeneratorRepresentation):
        rates = pauli_rates(rep_or_rates)
        if rates is None:
            raise NonPauliModel("analytic solution needs a Pauli-diagonal model")
        if driving is None:
            driving = driving_of(rep_or_rates)
    else:
        rates = tuple(as_time_function(g) for g in rep_or_rates)
    g1, g2, g3 = rates
    b = as_time_function(0.0) if driving is None else as_time_function(driving)

    t = np.asarray(t, dtype=float)
    i1, i2, i3 = g1.integral(t), g2.integral(t), g3.integral(t)
    lam_x = np.exp(-(i2 + i3))
    lam_y = np.exp(-(i1 + i3))
    lam_z = np.exp(-(i1 + i2))

    rho0 = np.asarray(rho0, dtype=complex)
    x0 = float(2 * rho0[0, 1].real)
    y0 = float(-2 * rho0[0, 1].imag)
    z0 = float((rho0[0, 0] - rho0[1, 1]).real)

    theta = b.integral(t)
    if np.max(np.abs(theta)) > 0:
        ts = np.atleast_1d(t)
        if np.max(np.abs(g1(ts) - g2(ts))) > 1e-12:
            raise NonPauliModel("driven analytic solution requires gamma1 = gamma2")
        w = (x0 + 1j * y0) * lam_x * np.exp(-1j * theta)
        x, y = w.real, w.imag
    else:
        x, y = x0 * lam_x, y0 * lam_y
    z = z0 * lam_z

    shape = np.shape(t)
    rho = np.empty(shape + (2, 2), dtype=complex)
    rho[..., 0, 0] = (1 + z) / 2
    rho[..., 1, 1] = (1 - z) / 2
    rho[..., 0, 1] = (x - 1j * y) / 2
    rho[..., 1, 0] = (x + 1j * y) / 2
    return rho


# -- model spec files ---------------------------------------------------------

_PAULI_BY_NAME = {"pauli_x": PAULI_X, "pauli_y": PAULI_Y, "pauli_z": PAULI_Z}
_TOP_KEYS = {"name", "dim", "channels", "driving", "initial_state", "rate_convention"}


@dataclass(frozen=True)
class ModelSpec:
    """A validated, declarative model description."""

    name: str
    dim: int
    representation: GeneratorRepresentation
    initial_state: np.ndarray
    document: dict


def _reject_extra(params: dict, where: str) -> None:
    if params:
        raise SchemaError(where, f"unknown keys {sorted(params)}")


def load_model_spec(document) -> ModelSpec:
    """Parse a model document (dict, JSON string, or path to a JSON file)."""
    if isinstance(document, (str, Path)):
        p = Path(document)
        try:
            is_file = p.exists()
        except OSError:
            is_file = False
        if is_file:
            document = json.loads(p.read_text())
        else:
            document = json.loads(str(document))
    if not isinstance(document, dict):
        raise SchemaError("$", "model document must be a JSON object")

    doc = dict(document)
    extra = set(doc) - _TOP_KEYS
    if extra:
        raise SchemaError("$", f"unknown keys {sorted(extra)}")

    name = str(doc.get("name", "model"))
    dim = int(doc.get("dim", 2))
    if dim < 2 or dim > 8:
        raise SchemaError("dim", "dim must be between 2 and 8")
    convention = doc.get("rate_convention", "gkls")
    if convention not in ("gkls", "pauli_half"):
        raise SchemaError("rate_convention", f"unknown convention {convention!r}")

    channels_doc = doc.get("channels", [])
    if not isinstance(channels_doc, list):
        raise SchemaError("channels", "must be a list")

    parsed = []
    pauli_names = []
    for i, ch in enumerate(channels_doc):
        where = f"channels[{i}]"
        if not isinstance(ch, dict) or set(ch) - {"lindblad", "rate"}:
            raise SchemaError(where, "must have exactly the keys lindblad, rate")
        lind = ch.get("lindblad")
        if isinstance(lind, str):
            if lind not in _PAULI_BY_NAME:
                raise SchemaError(f"{where}.lindblad", f"unknown operator {lind!r}")
            if dim != 2:
                raise SchemaError(f"{where}.lindblad", "Pauli operators need dim=2")
            op = _PAULI_BY_NAME[lind]
            pauli_names.append(lind)
        elif isinstance(lind, dict) and set(lind) == {"matrix"}:
            op = _parse_complex_matrix(lind["matrix"], dim, f"{where}.lindblad.matrix")
            pauli_names.append(None)
        else:
            raise SchemaError(f"{where}.lindblad", "expected a Pauli name or {'matrix': ...}")
        rate_doc = ch.get("rate")
        if not isinstance(rate_doc, dict) or "preset" not in rate_doc:
            raise SchemaError(f"{where}.rate", "expected {'preset': ..., 'params': {...}}")
        if set(rate_doc) - {"preset", "params"}:
            raise SchemaError(f"{where}.rate", "unknown keys")
        rate = make_rate(rate_doc["preset"], rate_doc.get("params"))
        parsed.append((op, rate))

    driving_doc = doc.get("driving", {"kind": "none"})
    if not isinstance(driving_doc, dict) or "kind" not in driving_doc:
        raise SchemaError("driving", "expected {'kind': ..., ...}")
    dpar = {k: v for k, v in driving_doc.items() if k != "kind"}
    b = make_driving(driving_doc["kind"], dpar)
    if driving_doc["kind"] != "none" and dim != 2:
        raise SchemaError("driving", "driving is only supported for dim=2")

    psi0 = _parse_initial_state(doc.get("initial_state"), dim)

    is_pauli = (
        dim == 2
        and all(n is not None for n in pauli_names)
        and len(set(pauli_names)) == len(pauli_names)
    )
    if convention == "pauli_half" and not is_pauli:
        raise SchemaError("rate_convention", "pauli_half needs distinct Pauli channels and dim=2")

    if is_pauli:
        by_name = dict(zip(pauli_names, (r for _, r in parsed)))
        zero = as_time_function(0.0)

        def gamma_of(key):
            r = by_name.get(key)
            if r is None:
                return zero
            if convention == "pauli_half":
                return r
            # gkls convention stores c = gamma/2
            return TimeFunction(lambda t, _r=r: 2.0 * np.asarray(_r(t)),
                                integral=(lambda t, _r=r: 2.0 * np.asarray(_r.integral(t)))
                                if r.has_integral else None,
                                label=f"2*{r.label}")

        rep = enm_model(gamma_of("pauli_x"), gamma_of("pauli_y"), gamma_of("pauli_z"),
                        driving=b, name=name)
    else:
        channels = tuple(
            Channel(lindblad=lambda t, _op=op: _op,
                    rate=lambda t, _r=rate: float(_r(t)))
            for op, rate in parsed
        )

        def hamiltonian(t, _b=b, _dim=dim):
            if _dim == 2:
                return -0.5 * float(_b(t)) * PAULI_Z
            return np.zeros((_dim, _dim), dtype=complex)

        rep = GeneratorRepresentation(dim=dim, hamiltonian=hamiltonian, channels=channels,
                                      meta={"model": name, "driving": b})

    return ModelSpec(name=name, dim=dim, representation=rep,
                     initial_state=psi0, document=document)


def _parse_complex_matrix(data, dim, where):
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(where, f"not a numeric array: {exc}") from None
    if arr.shape != (dim, dim, 2):
        raise SchemaError(where, f"expected shape ({dim}, {dim}, 2) of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _parse_initial_state(data, dim):
    if data is None:
        raise SchemaError("initial_state", "missing")
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError("initial_state", f"not numeric: {exc}") from None
    if arr.shape != (dim, 2):
        raise SchemaError("initial_state", f"expected {dim} [re, im] pairs")
    psi = arr[:, 0] + 1j * arr[:, 1]
    norm = np.linalg.norm(psi)
    if norm < 1e-12:
        raise NormalizationError("initial state has zero norm")
    if abs(norm - 1.0) > 1e-9:
        warnings.warn(f"initial state norm {norm:.6g} != 1; normalizing", stacklevel=2)
        psi = psi / norm
    return psi


PRESET_NAMES = ("enm_undriven", "enm_driven", "enm_dissipative")


def load_preset(name: str) -> ModelSpec:
    if name not in PRESET_NAMES:
        raise SchemaError("preset", f"unknown preset {name!r}; available: {PRESET_NAMES}")
    text = resources.files("roqj").joinpath(f"presets/{name}.json").read_text()
    return load_model_spec(json.loads(text))


def resolve_model(name_or_path: str) -> ModelSpec:
    """CLI helper: a shipped preset name, or a path to a model JSON file."""
    if name_or_path in PRESET_NAMES:
        return load_preset(name_or_path)
    p = Path(name_or_path)
    if not p.exists():
        raise SchemaError("model", f"{name_or_path!r} is neither a preset nor a file")
    return load_model_spec(p)
