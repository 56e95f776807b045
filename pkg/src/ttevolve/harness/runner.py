"""Experiment driver: builds models and states from a config, runs an integrator,
records observables and writes CSV rows plus a JSON metadata file."""

from __future__ import annotations

import copy
import csv
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..dense import ExpPropagator, dense_hamiltonian, imr_propagate, termsum_generator
from ..errors import CapacityError, ConfigError
from ..integrators import STEPPERS, IntegratorConfig, prepare
from ..local import LocalSolveConfig
from ..models import (
    IsingParams,
    PulseSchedule,
    TransmonParams,
    coupled_chain_params,
    ising_model,
    load_pulse_csv,
    periodic_chain_freqs,
    state_transfer_pulses,
    transmon_model,
)
from ..mpo import TimeDependentMpo, apply_mpo, expectation
from ..mps import MPS, compress, max_bonds, pad_bonds, product_state, save, to_vector
from ..observables import magnetization, magnetization_dense, state_error
from ..tucker import TuckerState, tucker_bug_step, tucker_product_state, tucker_to_dense
from .config import ExperimentConfig

CSV_SCHEMA = "1"
DENSE_STATE_CAP = 2**20
EXPM_CAP = 2**12
WARMUP_EPS = 1e-10


# -- model and initial state --------------------------------------------------


@dataclass
class Model:
    n: int
    phys_dims: list
    mpo: object  # MPO or TimeDependentMpo
    termsum: object
    time_independent: bool
    target: list | None = None  # local target vectors, if the model defines one


def build_model(cfg: ExperimentConfig) -> Model:
    m = cfg.model
    n = int(m["n"])
    if m["type"] == "ising":
        ts, mpo = ising_model(IsingParams(n, float(m.get("J", 1.0)), float(m.get("g", 1.0))))
        return Model(n, [2] * n, mpo, ts, True)

    preset = m.get("preset")
    if preset == "coupled":
        base = coupled_chain_params(n)
        freqs, couplings = base.freqs_ghz, base.couplings_ghz
    else:
        freqs, couplings = periodic_chain_freqs(n), [0.0] * (n - 1)
    params = TransmonParams(
        freqs_ghz=m.get("freqs_ghz", freqs),
        anharm_ghz=m.get("anharm_ghz", [0.2] * n),
        couplings_ghz=m.get("couplings_ghz", couplings),
        levels=m.get("levels", [2] * n),
        rot_freq_ghz=m.get("rot_freq_ghz"),
    )
    pulses = m.get("pulses", {"kind": "analytic"})
    target = None
    try:
        if pulses["kind"] == "analytic":
            schedule = state_transfer_pulses(params, float(cfg.T))
            target = []
            for d in params.levels:
                v = np.zeros(d, dtype=np.complex128)
                v[:2] = 1.0 / np.sqrt(2.0)
                target.append(v)
        elif pulses["kind"] == "file":
            schedule = load_pulse_csv(pulses["path"], pulses.get("unit", "GHz"))
        else:
            schedule = PulseSchedule()
        td_mpo, ts = transmon_model(params, schedule, horizon=float(cfg.T))
    except ValueError as exc:
        raise ConfigError(str(exc), field="model.pulses") from exc
    return Model(n, list(params.levels), td_mpo, ts, False, target)


def initial_vectors(cfg: ExperimentConfig, phys_dims) -> list:
    kind = cfg.initial["kind"]
    rng = np.random.default_rng(cfg.seed)
    out = []
    for k, d in enumerate(phys_dims):
        v = np.zeros(d, dtype=np.complex128)
        if kind == "zeros":
            v[0] = 1.0
        elif kind == "bits":
            b = int(str(cfg.initial["bits"])[k])
            if b >= d:
                raise ConfigError(f"level {b} exceeds site dimension {d}", field="initial.bits")
            v[b] = 1.0
        else:
            v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            v /= np.linalg.norm(v)
        out.append(v)
    return out


def _dense_vector(vectors) -> np.ndarray:
    out = np.ones(1, dtype=np.complex128)
    for v in vectors:
        out = np.kron(out, v)
    return out


def tdvp_bonds(cfg: ExperimentConfig, model: Model, psi0: MPS) -> list:
    cap = max_bonds(model.phys_dims)
    spec = cfg.tdvp_bonds
    if spec == "max":
        return cap
    if isinstance(spec, list):
        return [min(int(b), c) for b, c in zip(spec, cap)]
    h0 = model.mpo(0.0) if isinstance(model.mpo, TimeDependentMpo) else model.mpo
    hpsi = compress(apply_mpo(h0, psi0), WARMUP_EPS)
    return [min(max(a, b), c) for a, b, c in zip(hpsi.bond_dims[1:-1], psi0.bond_dims[1:-1], cap)]


# -- results ------------------------------------------------------------------


@dataclass
class ResultRow:
    run_id: str
    t: float
    norm: float
    energy: float | None
    max_bond: int | None
    stored_entries: int
    magnetization: list | None
    wall_ms: float


@dataclass
class RunResult:
    config: ExperimentConfig
    run_id: str
    rows: list
    final: object
    reports: list = field(default_factory=list)
    wall_ms: float = 0.0
    model: Model | None = None

    def final_vector(self, cap: int = DENSE_STATE_CAP) -> np.ndarray:
        return as_vector(self.final, cap)

    @property
    def max_storage(self) -> int:
        return max(r.stored_entries for r in self.rows)

    @property
    def max_bond(self):
        bonds = [r.max_bond for r in self.rows if r.max_bond is not None]
        return max(bonds) if bonds else None


def as_vector(state, cap: int = DENSE_STATE_CAP) -> np.ndarray:
    if isinstance(state, MPS):
        return to_vector(state, cap)
    if isinstance(state, TuckerState):
        total = int(np.prod(state.phys_dims))
        if total > cap:
            raise CapacityError(f"dense state of {total} entries exceeds cap {cap}")
        return tucker_to_dense(state).ravel()
    return np.asarray(state)


def _local_cfg(cfg: ExperimentConfig) -> LocalSolveConfig:
    lc = cfg.local
    return LocalSolveConfig(method=lc.method, substeps=lc.substeps, fp_tol=float(lc.fp_tol),
                            fp_max_iters=int(lc.fp_max_iters))


def _observe(cfg, model, state, t, run_id, wall_ms, max_bond, storage, dense_h=None) -> ResultRow:
    obs = cfg.outputs.observables
    if isinstance(state, MPS):
        nrm = float(np.linalg.norm(state[state.center])) if state.center is not None else None
        energy = None
        if "energy" in obs and model.time_independent:
            energy = expectation(model.mpo, state, norm_tol=None)
        mag = magnetization(state, normalize=True).tolist() if "magnetization" in obs else None
    else:
        vec = as_vector(state)
        nrm = float(np.linalg.norm(vec))
        energy = None
        if "energy" in obs and model.time_independent:
            h = dense_h if dense_h is not None else model.termsum.sparse(0.0)
            energy = float(np.vdot(vec, h @ vec).real)
        mag = magnetization_dense(vec, model.n).tolist() if "magnetization" in obs else None
    return ResultRow(run_id, float(t), nrm, energy, max_bond, int(storage), mag, float(wall_ms))


def run_experiment(cfg: ExperimentConfig, out_dir=None, run_id: str | None = None) -> RunResult:
    """Run one configured evolution; writes ``<name>.csv`` and ``<name>.json`` if ``out_dir`` is given."""
    model = build_model(cfg)
    run_id = run_id or cfg.name
    vectors = initial_vectors(cfg, model.phys_dims)
    method = cfg.integrator
    T, steps = float(cfg.T), int(cfg.steps)
    delta = T / steps
    cadence = cfg.outputs.cadence
    rows, reports = [], []
    elapsed = 0.0

    def keep(k):
        return k % cadence == 0 or k == steps

    if method in STEPPERS:
        icfg = IntegratorConfig(eps=float(cfg.eps), local=_local_cfg(cfg), bug_center=cfg.bug_center,
                                threads=cfg.threads)
        psi = product_state(vectors)
        if method == "tdvp":
            psi = pad_bonds(psi, tdvp_bonds(cfg, model, psi))
        psi = prepare(psi, method, icfg)
        step = STEPPERS[method]
        rows.append(_observe(cfg, model, psi, 0.0, run_id, 0.0, psi.max_bond, psi.storage()))
        for k in range(1, steps + 1):
            start = time.perf_counter()
            psi, rep = step(psi, model.mpo, (k - 1) * delta, delta, icfg)
            elapsed += time.perf_counter() - start
            rep.t = k * delta
            reports.append(rep)
            if keep(k):
                rows.append(_observe(cfg, model, psi, k * delta, run_id, 1e3 * elapsed, rep.max_bond, rep.storage))
        final = psi
    elif method == "tucker_bug":
        y = tucker_product_state(vectors)
        lcfg = _local_cfg(cfg)
        rows.append(_observe(cfg, model, y, 0.0, run_id, 0.0, max(y.ranks), y.storage()))
        for k in range(1, steps + 1):
            start = time.perf_counter()
            y, rep = tucker_bug_step(y, model.termsum, (k - 1) * delta, delta, float(cfg.eps), lcfg)
            elapsed += time.perf_counter() - start
            rep.t = k * delta
            reports.append(rep)
            if keep(k):
                rows.append(_observe(cfg, model, y, k * delta, run_id, 1e3 * elapsed, rep.max_bond, rep.storage))
        final = y
    else:
        total = int(np.prod(model.phys_dims))
        x = _dense_vector(vectors)
        if method == "dense_expm":
            if not model.time_independent:
                raise ConfigError("matrix exponentiation needs a time-independent model", field="integrator")
            if total > EXPM_CAP:
                raise ConfigError(f"state dimension {total} exceeds the dense cap {EXPM_CAP}", field="integrator")
            h = dense_hamiltonian(model.termsum, 0.0, EXPM_CAP)
            prop = ExpPropagator(h)
            x0 = x
            rows.append(_observe(cfg, model, x, 0.0, run_id, 0.0, None, total, h))
            for k in range(1, steps + 1):
                start = time.perf_counter()
                x = prop(x0, k * delta)
                elapsed += time.perf_counter() - start
                if keep(k):
                    rows.append(_observe(cfg, model, x, k * delta, run_id, 1e3 * elapsed, None, total, h))
        else:
            if total > DENSE_STATE_CAP:
                raise ConfigError(f"state dimension {total} exceeds the dense cap {DENSE_STATE_CAP}", field="integrator")
            h_at = termsum_generator(model.termsum)
            rows.append(_observe(cfg, model, x, 0.0, run_id, 0.0, None, total))
            for k in range(1, steps + 1):
                start = time.perf_counter()
                x = imr_propagate(x, h_at, k * delta, 1, float(cfg.local.fp_tol), t0=(k - 1) * delta,
                                  max_iters=max(int(cfg.local.fp_max_iters), 500))
                elapsed += time.perf_counter() - start
                if keep(k):
                    rows.append(_observe(cfg, model, x, k * delta, run_id, 1e3 * elapsed, None, total))
        final = x

    result = RunResult(cfg, run_id, rows, final, reports, 1e3 * elapsed, model)
    if out_dir is not None:
        write_run(result, out_dir)
    return result


def target_vector(model: Model):
    return None if model.target is None else _dense_vector(model.target)


def reference_vector(cfg: ExperimentConfig, model: Model | None = None, steps: int | None = None):
    """Exact final state by matrix exponentiation when possible, else ``None``."""
    model = model or build_model(cfg)
    total = int(np.prod(model.phys_dims))
    if not model.time_independent or total > EXPM_CAP:
        return None
    x0 = _dense_vector(initial_vectors(cfg, model.phys_dims))
    return ExpPropagator(dense_hamiltonian(model.termsum, 0.0, EXPM_CAP))(x0, float(cfg.T))


# -- writers ------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(rows, path):
    n_mag = max((len(r.magnetization) for r in rows if r.magnetization is not None), default=0)
    header = ["run_id", "t", "norm", "energy", "max_bond", "stored_entries"]
    header += [f"m_{j}" for j in range(n_mag)] + ["wall_ms"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            mag = r.magnetization if r.magnetization is not None else [None] * n_mag
            w.writerow([r.run_id, _fmt(r.t), _fmt(r.norm), _fmt(r.energy), _fmt(r.max_bond),
                        _fmt(r.stored_entries)] + [_fmt(m) for m in mag] + [f"{r.wall_ms:.3f}"])


def metadata(cfg: ExperimentConfig, extra=None) -> dict:
    meta = {
        "schema": CSV_SCHEMA,
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }
    if extra:
        meta.update(extra)
    return meta


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def write_run(result: RunResult, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = result.run_id
    write_rows(result.rows, out / f"{stem}.csv")
    summary = {
        "final_norm": result.rows[-1].norm,
        "max_bond": result.max_bond,
        "max_stored_entries": result.max_storage,
        "wall_ms": result.wall_ms,
    }
    tv = target_vector(result.model) if result.model is not None else None
    if tv is not None:
        try:
            vec = result.final_vector()
            summary["infidelity"] = 1.0 - abs(np.vdot(tv, vec)) ** 2 / np.vdot(vec, vec).real
        except CapacityError:
            pass
    write_json(metadata(result.config, {"run_id": stem, "summary": summary}), out / f"{stem}.json")
    if result.config.outputs.state_dump and isinstance(result.final, MPS):
        save(result.final, out / f"{stem}.tts")


def write_table(rows: list, path):
    if not rows:
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in keys])


# -- studies ------------------------------------------------------------------


def _variant(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    new = copy.deepcopy(cfg)
    for k, v in changes.items():
        setattr(new, k, v)
    return new


def convergence_study(cfg: ExperimentConfig, halvings: int = 4, keep_eps: bool = False, out_dir=None) -> dict:
    """Errors and observed orders ``log2(e_i / e_{i+1})`` under repeated step halving.

    The reference is the matrix exponential when the model allows it, else
    the finest run of the sequence.
    """
    base = cfg if keep_eps else _variant(cfg, eps=0.0)
    model = build_model(base)
    ref = reference_vector(base, model)
    counts = [base.steps * 2**k for k in range(halvings + 1)]
    finals = []
    for s in counts:
        run = run_experiment(_variant(base, steps=s, outputs=_final_only(base)), run_id=f"{base.name}_s{s}")
        finals.append(run.final_vector())
    if ref is None:
        ref = finals[-1]
        counts, finals = counts[:-1], finals[:-1]
        reference = "finest"
    else:
        reference = "expm"
    errors = [state_error(f, ref) for f in finals]
    table = []
    for i, (s, e) in enumerate(zip(counts, errors)):
        order = float(np.log2(errors[i - 1] / e)) if i > 0 and e > 0 else None
        table.append({"steps": s, "delta": base.T / s, "error": e, "order": order})
    out = {"reference": reference, "table": table}
    if out_dir is not None:
        p = Path(out_dir)
        p.mkdir(parents=True, exist_ok=True)
        write_table(table, p / f"{base.name}_convergence.csv")
        write_json(metadata(base, {"reference": reference, "halvings": halvings}), p / f"{base.name}_convergence.json")
    return out


def _final_only(cfg):
    o = copy.deepcopy(cfg.outputs)
    o.cadence = cfg.steps * 1024
    o.observables = ["norm"]
    return o


def paper_eps_grid(k_min: int = 1, k_max: int = 20) -> list:
    """``eps_k = 1e-3 * 10^(-k/4)``."""
    return [1e-3 * 10.0 ** (-k / 4.0) for k in range(k_min, k_max + 1)]


def find_eps_trunc(eps_list, errors, factor: float = 1.5):
    """Largest eps whose error is at most ``factor`` times the error at the smallest eps."""
    order = np.argsort(eps_list)
    base = errors[order[0]]
    ok = [eps_list[i] for i in order if errors[i] <= factor * base]
    return max(ok) if ok else None


def epsilon_sweep(cfg: ExperimentConfig, eps_list, out_dir=None) -> dict:
    model = build_model(cfg)
    ref = reference_vector(cfg, model)
    rows = []
    for eps in eps_list:
        run = run_experiment(_variant(cfg, eps=float(eps), outputs=_storage_only(cfg)), run_id=f"{cfg.name}_eps{eps:.3e}")
        row = {
            "eps": float(eps),
            "error": state_error(run.final_vector(), ref) if ref is not None else None,
            "max_stored_entries": run.max_storage,
            "final_stored_entries": run.rows[-1].stored_entries,
            "max_bond": run.max_bond,
            "wall_ms": run.wall_ms,
        }
        tv = target_vector(model)
        if tv is not None:
            vec = run.final_vector()
            row["infidelity"] = 1.0 - abs(np.vdot(tv, vec)) ** 2 / np.vdot(vec, vec).real
        rows.append(row)
    eps_trunc = None
    if ref is not None:
        eps_trunc = find_eps_trunc([r["eps"] for r in rows], [r["error"] for r in rows])
    out = {"rows": rows, "eps_trunc": eps_trunc}
    if out_dir is not None:
        p = Path(out_dir)
        p.mkdir(parents=True, exist_ok=True)
        write_table(rows, p / f"{cfg.name}_eps_sweep.csv")
        write_json(metadata(cfg, {"eps_trunc": eps_trunc}), p / f"{cfg.name}_eps_sweep.json")
    return out


def _storage_only(cfg):
    o = copy.deepcopy(cfg.outputs)
    o.cadence = 1
    o.observables = ["norm"]
    return o


def scaling_study(cfg: ExperimentConfig, sizes, out_dir=None) -> dict:
    """Wall-clock and bond growth for several chain lengths; fits the log-log slope."""
    if cfg.initial.get("kind") == "bits":
        raise ConfigError("scaling needs a size-independent initial state", field="initial.kind")
    rows = []
    for n in sizes:
        model_spec = dict(cfg.model, n=int(n))
        for key in ("freqs_ghz", "anharm_ghz", "couplings_ghz", "levels"):
            model_spec.pop(key, None)
        run = run_experiment(_variant(cfg, model=model_spec, outputs=_storage_only(cfg)), run_id=f"{cfg.name}_n{n}")
        rows.append({"n": int(n), "wall_ms": run.wall_ms, "max_bond": run.max_bond,
                     "max_stored_entries": run.max_storage})
    slope = None
    if len(rows) >= 2:
        slope = float(np.polyfit(np.log([r["n"] for r in rows]), np.log([r["wall_ms"] for r in rows]), 1)[0])
    out = {"rows": rows, "slope": slope}
    if out_dir is not None:
        p = Path(out_dir)
        p.mkdir(parents=True, exist_ok=True)
        write_table(rows, p / f"{cfg.name}_scaling.csv")
        write_json(metadata(cfg, {"sizes": list(sizes), "wall_slope": slope}), p / f"{cfg.name}_scaling.json")
    return out


def magnetization_study(cfg: ExperimentConfig, eps_list, out_dir=None) -> dict:
    """Final-time magnetization per eps and ``Delta_k = |m_k - m_{k-1}|``.

    ``eps_list`` is taken in the given order (the paper grid runs from large
    to small). The slope is a least-squares fit of ``log Delta_k`` against
    ``log eps_k`` over ``k >= 1``.
    """
    mags = []
    rows = []
    for eps in eps_list:
        o = _final_only(cfg)
        o.observables = ["norm", "magnetization"]
        run = run_experiment(_variant(cfg, eps=float(eps), outputs=o), run_id=f"{cfg.name}_eps{eps:.3e}")
        m = np.array(run.rows[-1].magnetization)
        delta = float(np.linalg.norm(m - mags[-1])) if mags else None
        mags.append(m)
        rows.append({"eps": float(eps), "delta": delta, "max_bond": run.max_bond,
                     "max_stored_entries": run.max_storage,
                     **{f"m_{j}": float(v) for j, v in enumerate(m)}})
    pts = [(r["eps"], r["delta"]) for r in rows if r["delta"] is not None and r["delta"] > 0]
    slope = None
    if len(pts) >= 2:
        e, d = np.array(pts).T
        slope = float(np.polyfit(np.log(e), np.log(d), 1)[0])
    out = {"rows": rows, "slope": slope}
    if out_dir is not None:
        p = Path(out_dir)
        p.mkdir(parents=True, exist_ok=True)
        write_table(rows, p / f"{cfg.name}_magnetization.csv")
        write_json(metadata(cfg, {"slope": slope}), p / f"{cfg.name}_magnetization.json")
    return out
