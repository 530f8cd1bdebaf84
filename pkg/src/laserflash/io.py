"""File formats: thermogram, chain and histogram CSVs, surrogate container."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import SurrogateMismatchError, ThermogramParseError
from .mcmc import Chain
from .pce import build_basis
from .solvers import DiscretizationParams, SgfemSurrogate, SurrogateBox, Thermogram

THERMOGRAM_HEADER = ["time_s", "temperature_K"]
CHAIN_HEADER = ["index", "theta1", "theta2", "lambda", "I", "accepted_flag", "used_surrogate_flag"]
SURROGATE_MAGIC = "laserflash-sgfem-surrogate"
SURROGATE_VERSION = 1


def _prepare(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def fmt(x) -> str:
    """Shortest round-trip decimal."""
    return repr(float(x))


def write_thermogram(path, thermogram: Thermogram) -> Path:
    path = _prepare(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(THERMOGRAM_HEADER)
        for t, u in zip(thermogram.times, thermogram.temps):
            w.writerow([fmt(t), fmt(u)])
    return path


def read_thermogram(path, equal_spacing_rtol: float = 1e-9) -> Thermogram:
    path = Path(path)
    times, temps = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != THERMOGRAM_HEADER:
            raise ThermogramParseError(f"{path}:1: expected header {','.join(THERMOGRAM_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ThermogramParseError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                t, u = float(row[0]), float(row[1])
            except ValueError:
                raise ThermogramParseError(f"{path}:{lineno}: non-numeric value in {row}") from None
            if not (math.isfinite(t) and math.isfinite(u)):
                raise ThermogramParseError(f"{path}:{lineno}: non-finite value")
            if times and t <= times[-1]:
                raise ThermogramParseError(f"{path}:{lineno}: times must be strictly increasing")
            times.append(t)
            temps.append(u)
    if len(times) < 2:
        raise ThermogramParseError(f"{path}: need at least 2 data rows, got {len(times)}")
    dt = np.diff(times)
    step = (times[-1] - times[0]) / (len(times) - 1)
    bad = np.flatnonzero(np.abs(dt - step) > equal_spacing_rtol * step)
    if len(bad):
        raise ThermogramParseError(f"{path}:{bad[0] + 3}: times are not equally spaced")
    return Thermogram(np.array(times), np.array(temps))


def save_surrogate(path, surrogate: SgfemSurrogate, geometry_hash: str | None = None) -> Path:
    """Write B, measurement times and a JSON header to an ``.npz`` container."""
    path = _prepare(path)
    header = {
        "magic": SURROGATE_MAGIC,
        "version": SURROGATE_VERSION,
        "k": surrogate.basis.k,
        "indices": [list(i) for i in surrogate.basis.indices],
        "box": {"mu_lambda": surrogate.box.mu_lambda, "nu_lambda": surrogate.box.nu_lambda,
                "mu_I": surrogate.box.mu_I, "nu_I": surrogate.box.nu_I},
        "disc": {"n_t": surrogate.disc.n_t, "k": surrogate.disc.k, "n_d": surrogate.disc.n_d,
                 "h_target": surrogate.disc.h_target},
        "input_hash": geometry_hash or surrogate.input_hash,
        "info": surrogate.info,
        "coeff_steps": sorted(int(s) for s in surrogate.coeffs),
    }
    arrays = {"B": np.asarray(surrogate.B), "times": np.asarray(surrogate.times),
              "header": np.array(json.dumps(header, sort_keys=True))}
    for step, U in surrogate.coeffs.items():
        arrays[f"coeff_{int(step)}"] = U
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_surrogate(path, expected_hash: str | None = None) -> SgfemSurrogate:
    with np.load(Path(path), allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        if header.get("magic") != SURROGATE_MAGIC:
            raise SurrogateMismatchError(f"{path} is not a surrogate file")
        if header.get("version") != SURROGATE_VERSION:
            raise SurrogateMismatchError(f"{path}: unsupported surrogate version {header.get('version')}")
        B = z["B"].copy()
        times = z["times"].copy()
        coeffs = {s: z[f"coeff_{s}"].copy() for s in header.get("coeff_steps", [])}
    if expected_hash is not None and header["input_hash"] != expected_hash:
        raise SurrogateMismatchError(
            "surrogate was built for a different geometry/material/discretization "
            f"(file hash {header['input_hash'][:12]}, config hash {expected_hash[:12]})")
    basis = build_basis(header["k"])
    if [list(i) for i in basis.indices] != header["indices"]:
        raise SurrogateMismatchError("surrogate basis ordering differs from this version")
    return SgfemSurrogate(basis=basis, box=SurrogateBox(**header["box"]),
                          disc=DiscretizationParams(**header["disc"]), B=B, times=times,
                          coeffs=coeffs, input_hash=header["input_hash"], info=header["info"])


def write_chain(path, chain: Chain) -> Path:
    path = _prepare(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={chain.seed}\n# beta={fmt(chain.beta)}\n# n_B={chain.n_B}\n"
                 f"# thin={chain.thin}\n# accepted={chain.accepted}\n# proposed={chain.proposed}\n"
                 f"# fallback_count={chain.fallback_count}\n")
        w = csv.writer(fh)
        w.writerow(CHAIN_HEADER)
        lam, I = chain.lam, chain.I
        for i in range(len(chain)):
            w.writerow([int(chain.indices[i]), fmt(chain.samples[i, 0]), fmt(chain.samples[i, 1]),
                        fmt(lam[i]), fmt(I[i]), int(chain.accepted_flags[i]),
                        int(chain.surrogate_flags[i])])
    return path


def read_chain(path) -> Chain:
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, value = ln[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        else:
            body.append(ln)
    reader = csv.reader(body)
    header = next(reader)
    if header != CHAIN_HEADER:
        raise ValueError(f"{path}: unexpected chain header {header}")
    for row in reader:
        if row:
            rows.append(row)
    arr = np.array([[float(r[1]), float(r[2])] for r in rows]).reshape(-1, 2)
    return Chain(samples=arr, indices=np.array([int(r[0]) for r in rows], dtype=np.int64),
                 accepted_flags=np.array([r[5] == "1" for r in rows], dtype=bool),
                 surrogate_flags=np.array([r[6] == "1" for r in rows], dtype=bool),
                 accepted=int(meta.get("accepted", 0)), proposed=int(meta.get("proposed", 0)),
                 fallback_count=int(meta.get("fallback_count", 0)),
                 seed=int(meta.get("seed", 0)), beta=float(meta.get("beta", "nan")),
                 n_B=int(meta.get("n_B", 0)), thin=int(meta.get("thin", 1)))


def write_histogram(path, edges, density, label: str, comment: str | None = None) -> Path:
    path = _prepare(path)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow([f"{label}_lo", f"{label}_hi", "density"])
        for lo, hi, v in zip(edges[:-1], edges[1:], density):
            w.writerow([fmt(lo), fmt(hi), fmt(v)])
    return path


def write_joint_histogram(path, edges, density) -> Path:
    path = _prepare(path)
    ex, ey = edges
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda_lo", "lambda_hi", "I_lo", "I_hi", "density"])
        for i in range(len(ex) - 1):
            for j in range(len(ey) - 1):
                w.writerow([fmt(ex[i]), fmt(ex[i + 1]), fmt(ey[j]), fmt(ey[j + 1]),
                            fmt(density[i, j])])
    return path


def write_summary(path, report: dict) -> Path:
    path = _prepare(path)

    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (np.floating, float)):
            v = float(v)
            return v if math.isfinite(v) else None
        if isinstance(v, (np.integer,)):
            return int(v)
        if isinstance(v, np.bool_):
            return bool(v)
        return v

    path.write_text(json.dumps(clean(report), indent=2, sort_keys=True) + "\n")
    return path
