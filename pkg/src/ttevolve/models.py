"""Hamiltonian builders: transverse-field Ising chain and driven transmon chain.

Units for the transmon model: time in ns, all frequencies and pulse
amplitudes stored as angular frequencies in rad/ns. Values quoted as
``omega / 2pi`` in GHz are multiplied by ``2 pi`` when a model is built.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import ConfigError, DimensionError
from .mpo import MPO, TimeDependentMpo
from .termsum import Term, TermSumOperator

TWO_PI = 2.0 * np.pi

SZ = 0.5 * np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
SX = 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)


def lowering_operator(d: int) -> np.ndarray:
    if d < 2:
        raise ValueError(f"lowering operator needs d >= 2, got {d}")
    return np.diag(np.sqrt(np.arange(1, d)), k=1).astype(np.complex128)


# -- Ising --------------------------------------------------------------------


@dataclass(frozen=True)
class IsingParams:
    n: int
    J: float = 1.0
    g: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("Ising chain needs at least 2 sites")


def ising_termsum(p: IsingParams) -> TermSumOperator:
    terms = [Term(((j, SZ), (j + 1, SZ)), -p.J) for j in range(p.n - 1)]
    terms += [Term(((j, SX),), -p.g) for j in range(p.n)]
    return TermSumOperator([2] * p.n, terms)


def ising_mpo(p: IsingParams) -> MPO:
    """``H = -J sum Sz_j Sz_{j+1} - g sum Sx_j`` with bond dimension 3."""
    eye = np.eye(2, dtype=np.complex128)
    w = np.zeros((3, 2, 2, 3), dtype=np.complex128)
    w[0, :, :, 0] = eye
    w[0, :, :, 1] = SZ
    w[0, :, :, 2] = -p.g * SX
    w[1, :, :, 2] = -p.J * SZ
    w[2, :, :, 2] = eye
    cores = [w.copy() for _ in range(p.n)]
    cores[0] = w[:1]
    cores[-1] = w[:, :, :, 2:]
    return MPO(cores)


def ising_model(p: IsingParams) -> tuple[TermSumOperator, MPO]:
    return ising_termsum(p), ising_mpo(p)


# -- pulses -------------------------------------------------------------------


@dataclass
class SampledPulse:
    """Piecewise-linear table of ``(t, p, q)``."""

    t: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if len(self.t) < 1 or np.any(np.diff(self.t) <= 0):
            raise ValueError("pulse sample times must be strictly increasing")
        if not (np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.q))):
            raise ValueError("pulse samples must be finite")

    @property
    def horizon(self):
        return float(self.t[0]), float(self.t[-1])

    def __call__(self, t):
        return float(np.interp(t, self.t, self.p)), float(np.interp(t, self.t, self.q))


@dataclass
class CarrierPulse:
    """``p + i q = sum_c env_c(t) exp(i Omega_c t)`` with cubic B-spline envelopes.

    Knots are uniform on ``[0, T]``; ``coeffs[c]`` holds the complex spline
    coefficients of carrier ``c`` (``n_basis`` of them).
    """

    T: float
    carriers: list
    coeffs: list

    def __post_init__(self):
        self.carriers = [float(c) for c in self.carriers]
        self.coeffs = [np.asarray(c, dtype=np.complex128) for c in self.coeffs]
        if len(self.carriers) != len(self.coeffs):
            raise ValueError("one coefficient vector per carrier required")
        self._splines = []
        for c in self.coeffs:
            n_basis = len(c)
            if n_basis < 1:
                raise ValueError("empty coefficient vector")
            k = min(3, n_basis - 1)
            inner = np.linspace(0.0, self.T, n_basis - k + 1)
            knots = np.concatenate([[0.0] * k, inner, [self.T] * k])
            self._splines.append(BSpline(knots, c, k, extrapolate=False))

    @property
    def horizon(self):
        return 0.0, float(self.T)

    def __call__(self, t):
        z = 0j
        for omega, spl in zip(self.carriers, self._splines):
            env = complex(spl(t)) if self.T > 0 else 0j
            z += env * np.exp(1j * omega * t)
        return z.real, z.imag


@dataclass
class PulseSchedule:
    """Per-qubit control functions; qubits without an entry are undriven."""

    pulses: dict = field(default_factory=dict)

    def horizon(self):
        if not self.pulses:
            return 0.0, np.inf
        lo = max(p.horizon[0] for p in self.pulses.values())
        hi = min(p.horizon[1] for p in self.pulses.values())
        return lo, hi


def eval_controls(s: PulseSchedule, k: int, t: float, tol: float = 1e-9) -> tuple[float, float]:
    """``(p_k(t), q_k(t))`` in rad/ns."""
    pulse = s.pulses.get(k)
    if pulse is None:
        return 0.0, 0.0
    lo, hi = pulse.horizon
    if t < lo - tol or t > hi + tol:
        raise ValueError(f"t={t} outside pulse horizon [{lo}, {hi}] for qubit {k}")
    return pulse(min(max(t, lo), hi))


def load_pulse_csv(path, unit: str = "GHz") -> PulseSchedule:
    """Read a ``qubit,t_ns,p,q`` table (qubits numbered from 0).

    ``unit="GHz"`` means amplitudes are given as ``p / 2pi`` and are scaled by
    ``2 pi``; ``unit="rad/ns"`` reads them as-is.
    """
    scale = {"GHz": TWO_PI, "rad/ns": 1.0}.get(unit)
    if scale is None:
        raise ValueError(f"unknown pulse unit {unit!r}")
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"qubit", "t_ns", "p", "q"} - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"pulse file lacks columns {sorted(missing)}", field=str(path))
        for line, row in enumerate(reader, start=2):
            try:
                rows.setdefault(int(row["qubit"]), []).append(
                    (float(row["t_ns"]), float(row["p"]), float(row["q"]))
                )
            except ValueError as exc:
                raise ConfigError(f"line {line}: {exc}", field=str(path)) from exc
    pulses = {}
    for k, data in rows.items():
        arr = np.array(data)
        try:
            pulses[k] = SampledPulse(arr[:, 0], scale * arr[:, 1], scale * arr[:, 2])
        except ValueError as exc:
            raise ConfigError(f"qubit {k}: {exc}", field=str(path)) from exc
    return PulseSchedule(pulses)


def write_pulse_csv(path, schedule: PulseSchedule, times, unit: str = "GHz"):
    scale = {"GHz": TWO_PI, "rad/ns": 1.0}[unit]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["qubit", "t_ns", "p", "q"])
        for k in sorted(schedule.pulses):
            for t in times:
                p, q = eval_controls(schedule, k, t)
                w.writerow([k, repr(float(t)), repr(p / scale), repr(q / scale)])


# -- transmon chain -----------------------------------------------------------


@dataclass
class TransmonParams:
    """Chain of transmons; frequencies given as ``omega / 2pi`` in GHz."""

    freqs_ghz: list
    anharm_ghz: list | None = None
    couplings_ghz: list | None = None
    levels: list | None = None
    rot_freq_ghz: float | None = None

    def __post_init__(self):
        n = len(self.freqs_ghz)
        if n < 1:
            raise ValueError("need at least one qubit")
        self.freqs_ghz = [float(f) for f in self.freqs_ghz]
        if any(f <= 0 for f in self.freqs_ghz):
            raise ValueError("transition frequencies must be positive")
        self.anharm_ghz = [0.0] * n if self.anharm_ghz is None else [float(x) for x in self.anharm_ghz]
        self.couplings_ghz = [0.0] * (n - 1) if self.couplings_ghz is None else [float(x) for x in self.couplings_ghz]
        self.levels = [2] * n if self.levels is None else [int(d) for d in self.levels]
        if len(self.anharm_ghz) != n or len(self.levels) != n:
            raise ValueError("anharmonicities and levels need one entry per qubit")
        if len(self.couplings_ghz) != n - 1:
            raise ValueError("couplings are nearest-neighbour only: need N-1 values")
        if self.rot_freq_ghz is None:
            self.rot_freq_ghz = float(np.mean(self.freqs_ghz))

    @property
    def n(self):
        return len(self.freqs_ghz)

    @property
    def detunings(self) -> np.ndarray:
        """``omega_k - omega_d`` in rad/ns."""
        return TWO_PI * (np.array(self.freqs_ghz) - self.rot_freq_ghz)

    @property
    def anharmonicities(self) -> np.ndarray:
        return TWO_PI * np.array(self.anharm_ghz)

    @property
    def couplings(self) -> np.ndarray:
        return TWO_PI * np.array(self.couplings_ghz)


def coupled_chain_params(n: int) -> TransmonParams:
    """5 MHz nearest-neighbour chain with ``omega_k / 2pi = 4.64 + 0.06 k`` GHz."""
    return TransmonParams([4.64 + 0.06 * k for k in range(n)], couplings_ghz=[0.005] * (n - 1))


def periodic_chain_freqs(n: int) -> list:
    """Uncoupled-chain frequencies repeating with period 8 (GHz)."""
    out = []
    for k in range(1, n + 1):
        r = (k - 1) % 4
        if (k - 1) % 8 < 4:
            out.append(5.18 - 0.06 * r)
        else:
            out.append(5.18 + 0.06 * r - 0.15)
    return out


def carrier_frequencies(p: TransmonParams, k: int) -> list:
    """Carriers for qubit ``k``: its own and its neighbours' frequencies, in the rotating frame."""
    sites = [j for j in (k - 1, k, k + 1) if 0 <= j < p.n]
    if np.all(p.couplings == 0):
        sites = [k]
    return [TWO_PI * (p.freqs_ghz[j] - p.rot_freq_ghz) for j in sites]


def state_transfer_pulses(p: TransmonParams, T: float) -> PulseSchedule:
    """Constant-envelope resonant pulses taking each uncoupled qubit from ``|0>`` to ``(|0>+|1>)/sqrt 2`` at ``T``.

    Each qubit gets ``p + i q = -i A exp(i D (t - T))`` with ``A = pi / (4T)``
    and ``D`` its detuning, so the pulse area is ``pi/4`` and the phase of the
    ``|1>`` amplitude vanishes at ``t = T``. Exact only for two-level qubits
    without coupling.
    """
    amp = np.pi / (4.0 * T)
    pulses = {}
    for k, det in enumerate(p.detunings):
        coeff = -1j * amp * np.exp(-1j * det * T)
        pulses[k] = CarrierPulse(T, [det], [np.full(4, coeff)])
    return PulseSchedule(pulses)


def _local_drift(p: TransmonParams, k: int) -> np.ndarray:
    a = lowering_operator(p.levels[k])
    ad = a.conj().T
    return p.detunings[k] * (ad @ a) - 0.5 * p.anharmonicities[k] * (ad @ ad @ a @ a)


def transmon_termsum(p: TransmonParams, s: PulseSchedule) -> TermSumOperator:
    """Drift, nearest-neighbour exchange and control terms as a term sum."""
    terms = []
    for k in range(p.n):
        terms.append(Term(((k, _local_drift(p, k)),), 1.0))
    for k in range(p.n - 1):
        a1, a2 = lowering_operator(p.levels[k]), lowering_operator(p.levels[k + 1])
        J = p.couplings[k]
        terms.append(Term(((k, a1.conj().T), (k + 1, a2)), J))
        terms.append(Term(((k, a1), (k + 1, a2.conj().T)), J))
    for k in range(p.n):
        a = lowering_operator(p.levels[k])
        x_op = a + a.conj().T
        y_op = 1j * (a - a.conj().T)
        terms.append(Term(((k, x_op),), lambda t, k=k: eval_controls(s, k, t)[0]))
        terms.append(Term(((k, y_op),), lambda t, k=k: eval_controls(s, k, t)[1]))
    return TermSumOperator(p.levels, terms)


def transmon_mpo(p: TransmonParams, s: PulseSchedule) -> TimeDependentMpo:
    """Bond-dimension-4 MPO of the rotating-frame transmon Hamiltonian.

    Channels: 0 = identity so far, 1 = open ``a^+``, 2 = open ``a``, 3 = done.
    """
    n = p.n
    drifts = [_local_drift(p, k) for k in range(n)]
    ops = []
    for k in range(n):
        a = lowering_operator(p.levels[k])
        ops.append((a, a.conj().T, np.eye(p.levels[k], dtype=np.complex128)))

    def build(t: float) -> MPO:
        cores = []
        for k in range(n):
            a, ad, eye = ops[k]
            pk, qk = eval_controls(s, k, t)
            local = drifts[k] + pk * (a + ad) + 1j * qk * (a - ad)
            d = p.levels[k]
            w = np.zeros((4, d, d, 4), dtype=np.complex128)
            w[0, :, :, 0] = eye
            w[0, :, :, 1] = ad
            w[0, :, :, 2] = a
            w[0, :, :, 3] = local
            if k > 0:
                J = p.couplings[k - 1]
                w[1, :, :, 3] = J * a
                w[2, :, :, 3] = J * ad
            w[3, :, :, 3] = eye
            if k == 0:
                w = w[:1]
            if k == n - 1:
                w = w[:, :, :, 3:]
            cores.append(w)
        return MPO(cores)

    if n < 2:
        raise DimensionError("MPO form needs at least two qubits")
    return TimeDependentMpo(build)


def transmon_model(p: TransmonParams, s: PulseSchedule, horizon: float | None = None):
    """``(TimeDependentMpo, TermSumOperator)`` for the driven chain."""
    if horizon is not None:
        lo, hi = s.horizon()
        if hi < horizon - 1e-9:
            raise ValueError(f"pulse schedule ends at {hi} ns, before requested horizon {horizon} ns")
    return transmon_mpo(p, s), transmon_termsum(p, s)
