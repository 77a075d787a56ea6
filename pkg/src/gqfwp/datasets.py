"""Deterministic benchmark series and sunspot-record ingestion.

Six generators: a damped pendulum (angular velocity), the order-2 Bessel
function, the NARMA5/NARMA10 recurrences, a delayed-pulse control signal,
and open-system cavity-qubit dynamics integrated with a small Lindblad
stepper on a 5-level truncated space. All generators are deterministic
given their parameters; there is no RNG anywhere in this module except
the synthetic sunspot substitute, which is deterministic given its seed.

Series files are two-column CSV (t, value) with a leading `# meta:` JSON
comment carrying the generator parameters. Sunspot records use the
monthly-mean text format (whitespace-separated columns: year, month,
decimal year, value, standard deviation, observation count, marker),
with -1 as the missing-value sentinel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DensityMatrix",
    "Normalizer",
    "RawSeries",
    "fit_normalizer",
    "gen_bessel",
    "gen_damped_shm",
    "gen_dqc",
    "gen_jaynes_cummings",
    "gen_narma",
    "gen_synthetic_sunspots",
    "load_series_csv",
    "load_silso",
    "normalize",
    "write_series_csv",
    "write_silso",
]


@dataclass
class RawSeries:
    """A named scalar time series with generator metadata."""

    name: str
    t: np.ndarray
    v: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.t.shape != self.v.shape:
            raise ValueError("timestamp/value length mismatch")
        if self.t.size > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return self.t.size


@dataclass
class DensityMatrix:
    """dim x dim complex state with the standard physicality checks."""

    dim: int
    entries: np.ndarray

    def validate(self, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8):
        rho = self.entries
        if rho.shape != (self.dim, self.dim):
            raise ValueError("entry grid does not match dim")
        if np.abs(rho - rho.conj().T).max() > herm_tol:
            raise ValueError("not Hermitian")
        if abs(np.trace(rho).real - 1.0) > trace_tol:
            raise ValueError("trace deviates from one")
        if np.linalg.eigvalsh(rho).min() < -eig_tol:
            raise ValueError("negative eigenvalue")


# --- pendulum ---------------------------------------------------------------


def gen_damped_shm(steps: int = 1000, dt: float = 20.0 / 999) -> RawSeries:
    """Angular velocity of a damped pendulum, integrated with classic RK4.

    theta'' + 0.15 theta' + 9.81 sin(theta) = 0, theta(0)=0, theta'(0)=3.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if dt <= 0:
        raise ValueError("dt must be positive")
    b_over_m = 0.15
    g_over_l = 9.81

    def deriv(s):
        theta, omega = s
        return np.array([omega, -b_over_m * omega - g_over_l * math.sin(theta)])

    state = np.array([0.0, 3.0])
    v = np.empty(steps)
    v[0] = state[1]
    for i in range(1, steps):
        k1 = deriv(state)
        k2 = deriv(state + 0.5 * dt * k1)
        k3 = deriv(state + 0.5 * dt * k2)
        k4 = deriv(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        v[i] = state[1]
    t = np.arange(steps) * dt
    meta = {"generator": "damped_shm", "steps": steps, "dt": dt,
            "damping": b_over_m, "g_over_l": g_over_l, "omega0": 3.0}
    return RawSeries("damped_shm", t, v, meta)


# --- Bessel -----------------------------------------------------------------


def bessel_series(order: int, x, tol: str = "1e-16") -> np.ndarray:
    """J_n(x) from the ascending power series, truncated when the term
    drops below tol.

    The series alternates with terms that grow to ~exp(x) before
    decaying, so plain float64 accumulation loses ~x/ln(10) digits to
    cancellation at large x. Terms are accumulated in 50-digit decimal
    arithmetic and the sum rounded once at the end, keeping the result
    accurate to the truncation level across the whole sampled range.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    from decimal import Decimal, getcontext

    getcontext().prec = 50
    cutoff = Decimal(tol)
    fact = Decimal(math.factorial(order))
    out = np.empty(x.shape)
    for i, xi in enumerate(x.ravel()):
        half = Decimal(float(xi)) / 2
        h2 = half * half
        term = half**order / fact
        total = term
        m = 0
        while abs(term) >= cutoff and m <= 200:
            m += 1
            term = -term * h2 / (m * (m + order))
            total += term
        out.ravel()[i] = float(total)
    return out


def gen_bessel(steps: int = 1000, x_max: float = 30.0) -> RawSeries:
    """Order-2 Bessel function of the first kind on [0, x_max]."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    t = np.linspace(0.0, x_max, steps)
    v = bessel_series(2, t)
    meta = {"generator": "bessel", "order": 2, "steps": steps, "x_max": x_max}
    return RawSeries("bessel", t, v, meta)


# --- NARMA ------------------------------------------------------------------


def narma_input(t: np.ndarray) -> np.ndarray:
    """Driving signal: product of three incommensurate sines, offset to be
    nonnegative and scaled to [0, 0.2]."""
    two_pi_over = 2.0 * np.pi / 100.0
    return 0.1 * (
        np.sin(two_pi_over * 2.11 * t)
        * np.sin(two_pi_over * 3.73 * t)
        * np.sin(two_pi_over * 4.11 * t)
        + 1.0
    )


def gen_narma(order: int, M: int = 300) -> RawSeries:
    """Order-n nonlinear autoregressive moving-average benchmark.

    y_{t+1} = 0.3 y_t + 0.05 y_t sum_{j<n} y_{t-j} + 1.5 u_{t-n+1} u_t + 0.1
    with zero pre-history: y and u at negative indices contribute zero, so
    the recurrence runs from t = 0 and y_1 = 0.1 when the drive vanishes.
    """
    if order not in (5, 10):
        raise ValueError("order must be 5 or 10")
    if M <= order:
        raise ValueError("M must exceed the order")
    u = narma_input(np.arange(M, dtype=np.float64))
    y = np.zeros(M)
    for t in range(M - 1):
        tail = y[max(0, t - order + 1) : t + 1].sum()
        drive = u[t - order + 1] * u[t] if t - order + 1 >= 0 else 0.0
        y[t + 1] = 0.3 * y[t] + 0.05 * y[t] * tail + 1.5 * drive + 0.1
    t_axis = np.arange(M, dtype=np.float64)
    meta = {"generator": "narma", "order": order, "M": M}
    return RawSeries(f"narma{order}", t_axis, y, meta)


# --- delayed pulses ---------------------------------------------------------


def gen_dqc(samples: int = 1100, t_min: float = -2.0, t_max: float = 20.0) -> RawSeries:
    """Train of localized pulses at t = 2n with an exponentially decaying
    envelope; a delayed-feedback control benchmark signal."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    t = np.linspace(t_min, t_max, samples)
    v = np.zeros(samples)
    for n in range(11):
        v += np.exp(-10.0 * (t - 2.0 * n) ** 2)
    v *= np.exp(-t / 16.0)
    meta = {"generator": "dqc", "samples": samples, "t_min": t_min, "t_max": t_max}
    return RawSeries("dqc", t, v, meta)


# --- cavity-qubit dynamics --------------------------------------------------

# truncated basis: |g,0>, |g,1>, |e,0>, |e,1>, |g,2>
_JC_DIM = 5


def jc_operators():
    """(a, sigma_minus, n_excited) on the 5-level truncated space."""
    a = np.zeros((_JC_DIM, _JC_DIM), dtype=np.complex128)
    a[0, 1] = 1.0  # |g,1> -> |g,0>
    a[1, 4] = math.sqrt(2.0)  # |g,2> -> |g,1>
    a[2, 3] = 1.0  # |e,1> -> |e,0>
    sm = np.zeros((_JC_DIM, _JC_DIM), dtype=np.complex128)
    sm[0, 2] = 1.0  # |e,0> -> |g,0>
    sm[1, 3] = 1.0  # |e,1> -> |g,1>
    n_exc = sm.conj().T @ sm
    return a, sm, n_exc


def gen_jaynes_cummings(
    steps: int = 3000,
    t_max: float = 50.0,
    gamma: float = 0.05,
    coupling: float = math.pi,
) -> RawSeries:
    """Qubit excitation probability of a lossy resonant cavity-qubit pair.

    Integrates rho' = -i[H, rho] + C rho C^dag - {C^dag C, rho}/2 with
    H = w_c a^dag a + w_q s+ s- + g (s- a^dag + s+ a), w_c = w_q = 2 pi,
    C = sqrt(gamma) a, starting from one cavity photon and the qubit in
    its ground state. With gamma = 0 the single-excitation manifold gives
    the exact Rabi law <s+ s->(t) = sin^2(g t).
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    a, sm, n_exc = jc_operators()
    omega = 2.0 * math.pi
    h = omega * (a.conj().T @ a) + omega * n_exc + coupling * (
        sm @ a.conj().T + sm.conj().T @ a
    )
    c = math.sqrt(gamma) * a
    cdc = c.conj().T @ c

    def lindblad(rho):
        comm = h @ rho - rho @ h
        diss = c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
        return -1j * comm + diss

    rho = np.zeros((_JC_DIM, _JC_DIM), dtype=np.complex128)
    rho[1, 1] = 1.0  # |g,1><g,1|
    dt = t_max / (steps - 1)
    v = np.empty(steps)
    v[0] = np.trace(rho @ n_exc).real
    for i in range(1, steps):
        k1 = lindblad(rho)
        k2 = lindblad(rho + 0.5 * dt * k1)
        k3 = lindblad(rho + 0.5 * dt * k2)
        k4 = lindblad(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-6:
            raise RuntimeError(f"trace drift {tr - 1.0:.3e} at step {i}")
        v[i] = np.trace(rho @ n_exc).real
    t = np.linspace(0.0, t_max, steps)
    meta = {"generator": "jaynes_cummings", "steps": steps, "t_max": t_max,
            "gamma": gamma, "coupling": coupling, "omega": omega}
    return RawSeries("jaynes_cummings", t, v, meta)


# --- sunspot records --------------------------------------------------------


def load_silso(path) -> RawSeries:
    """Monthly sunspot means from the standard whitespace text format.

    Rows with the -1 missing sentinel are dropped; their indices are
    reported in meta['rejected_indices'].
    """
    t, v, rejected = [], [], []
    with open(path) as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cols = line.split()
            if len(cols) < 4:
                raise ValueError(f"unparseable row {i}: {line!r}")
            try:
                dec_year = float(cols[2])
                value = float(cols[3])
            except ValueError as exc:
                raise ValueError(f"unparseable row {i}: {line!r}") from exc
            if value == -1.0:
                rejected.append(i)
                continue
            t.append(dec_year)
            v.append(value)
    t = np.asarray(t)
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValueError("non-monotone dates")
    meta = {"source": str(path), "rejected_indices": rejected}
    return RawSeries("sunspots", t, np.asarray(v), meta)


def write_silso(path, series: RawSeries):
    """Write a monthly series back out in the 7-column text format."""
    with open(path, "w") as fh:
        for dec_year, value in zip(series.t, series.v):
            year = int(dec_year)
            month = int(round((dec_year - year) * 12.0 + 0.5))
            month = min(max(month, 1), 12)
            fh.write(
                f"{year:4d} {month:2d} {dec_year:9.3f} {value:7.1f} "
                f"{1.0:5.1f} {1:4d} {1:1d}\n"
            )


def gen_synthetic_sunspots(months: int = 3326, start_year: float = 1749.0,
                           seed: int = 0) -> RawSeries:
    """Sunspot-like stand-in series: an 11-year cycle with drifting
    amplitude plus multiplicative noise, deterministic given the seed.

    Used where an offline environment has no archive file; the loader and
    pipeline are format-identical either way.
    """
    rng = np.random.default_rng(seed)
    t = start_year + (np.arange(months) + 0.5) / 12.0
    phase = 2.0 * np.pi * (t - start_year) / 11.0
    amp = 110.0 + 60.0 * np.sin(2.0 * np.pi * (t - start_year) / 90.0)
    base = amp * np.abs(np.sin(0.5 * phase)) ** 1.5
    noise = 1.0 + 0.25 * rng.standard_normal(months)
    v = np.clip(base * noise + 5.0 * rng.random(months), 0.0, None)
    meta = {"generator": "synthetic_sunspots", "months": months,
            "start_year": start_year, "seed": seed}
    return RawSeries("sunspots", t, v, meta)


# --- normalization ----------------------------------------------------------


@dataclass(frozen=True)
class Normalizer:
    """Affine map fitted on training-split statistics only."""

    vmin: float
    vmax: float
    lo: float
    hi: float

    def apply(self, v):
        scale = (self.hi - self.lo) / (self.vmax - self.vmin)
        return (np.asarray(v) - self.vmin) * scale + self.lo

    def invert(self, y):
        scale = (self.vmax - self.vmin) / (self.hi - self.lo)
        return (np.asarray(y) - self.lo) * scale + self.vmin

    def to_dict(self):
        return {"vmin": self.vmin, "vmax": self.vmax, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d):
        return cls(d["vmin"], d["vmax"], d["lo"], d["hi"])


def fit_normalizer(train_values, lo: float = -1.0, hi: float = 1.0) -> Normalizer:
    v = np.asarray(train_values, dtype=np.float64)
    vmin, vmax = float(v.min()), float(v.max())
    if vmax <= vmin:
        raise ValueError("constant series cannot be normalized")
    return Normalizer(vmin, vmax, lo, hi)


def normalize(values, lo: float = -1.0, hi: float = 1.0, train_values=None):
    """Scale values into [lo, hi] using train-split statistics.

    Returns (scaled, normalizer). Values outside the training range map
    outside [lo, hi]; there is no clipping.
    """
    stats = values if train_values is None else train_values
    norm = fit_normalizer(stats, lo, hi)
    return norm.apply(values), norm


# --- series file I/O --------------------------------------------------------


def write_series_csv(path, series: RawSeries):
    meta = dict(series.meta)
    meta["name"] = series.name
    with open(path, "w") as fh:
        fh.write("# meta: " + json.dumps(meta) + "\n")
        fh.write("t,value\n")
        for ti, vi in zip(series.t, series.v):
            fh.write(f"{float(ti)!r},{float(vi)!r}\n")


def load_series_csv(path) -> RawSeries:
    meta = {}
    t, v = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# meta:"):
                meta = json.loads(line[len("# meta:") :])
                continue
            if line.startswith("#") or line.startswith("t,"):
                continue
            a, b = line.split(",")
            t.append(float(a))
            v.append(float(b))
    name = meta.pop("name", "series")
    return RawSeries(name, np.asarray(t), np.asarray(v), meta)
