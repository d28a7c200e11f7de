"""Experiment driver: lower-bound sweeps, solver rate runs, Monte Carlo tail checks and the PSD scan.

Every run is a pure function of its config and seed range, and CSV output
contains no timing data, so repeated runs produce byte-identical files.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .adversaries import (
    CSV_FIELDS,
    AdvGeometry,
    Certificate,
    OneSidedAdversary,
    TwoSidedAdversary,
    make_params,
    nonsep_min_rows,
    probe_nonseparation,
)
from .core import GameInstance, Geometry, NormContract, min_payoff, tridiag_psd_margin
from .oracles import Algorithm, DenseOracle, OracleKind, Transcript, drive_interaction
from .reduction import ReducedAlgorithm
from .solvers import (
    ConstantAlgorithm,
    MirrorProxAlgorithm,
    PerceptronAlgorithm,
    RandomProbeAlgorithm,
    SmoothedAGDAlgorithm,
    SmoothingConfig,
    SubgradientAlgorithm,
    agd_smoothed,
    mirror_prox,
    perceptron,
)

log = logging.getLogger(__name__)

RESAMPLE_ATTEMPTS = 8


class Mode(str, enum.Enum):
    LOWER_L2 = "l2"
    LOWER_L1 = "l1"
    LOWER_ONESIDED = "onesided"
    UPPER_RATE = "upper"
    STAT_TEST = "stat"
    PSD_SCAN = "psd"


def parse_seed_range(text: str) -> tuple[int, int]:
    """``"3..7"`` -> ``(3, 7)`` (inclusive); a bare integer is a one-seed range."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        rng = (int(lo), int(hi))
    else:
        rng = (int(text), int(text))
    if rng[0] > rng[1]:
        raise ValueError(f"empty seed range {text!r}")
    return rng


def load_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment and dashes in keys become underscores."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


@dataclass
class ExperimentConfig:
    mode: Mode
    algorithm: str
    T: int
    n: int = 0
    d: int = 0
    delta: float | None = None
    seeds: tuple[int, int] = (0, 0)
    tol_replay: float = 1e-9
    tol_nonsep: float = 1e-9
    tol_witness: float = 1e-9
    out_csv: str | None = None
    out_json: str | None = None
    resample: bool = False
    probe: bool = False
    eps: float = 0.1

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.seeds = tuple(self.seeds)
        if len(self.seeds) != 2 or self.seeds[0] > self.seeds[1]:
            raise ValueError(f"seed range {self.seeds} is empty")
        if self.T < 0:
            raise ValueError("T must be nonnegative")

    def seed_list(self) -> list[int]:
        return list(range(self.seeds[0], self.seeds[1] + 1))

    def echo(self) -> dict[str, Any]:
        out = asdict(self)
        out["mode"] = self.mode.value
        out["seeds"] = f"{self.seeds[0]}..{self.seeds[1]}"
        return out


@dataclass
class SeedResult:
    seed: int
    matrix: GameInstance
    transcript: Transcript
    certificate: Certificate
    wall_clock: float
    resampled_from: int | None = None
    probe_value: float | None = None


@dataclass
class RunSummary:
    config: ExperimentConfig
    rows: list[dict]
    fieldnames: list[str]
    passes: list[bool]
    wall_clock: list[float]
    extras: dict[str, Any] = field(default_factory=dict)
    curves: list[dict] = field(default_factory=list)

    @property
    def success_fraction(self) -> float:
        return sum(self.passes) / len(self.passes) if self.passes else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows)
        return buf.getvalue()

    def curves_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["seed", "iteration", "value"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.curves)
        return buf.getvalue()

    def summary(self) -> dict[str, Any]:
        return {
            "config": self.config.echo(),
            "success_fraction": self.success_fraction,
            "passes": sum(self.passes),
            "seeds": len(self.passes),
            "wall_clock": self.wall_clock,
            "wall_clock_total": float(sum(self.wall_clock)),
            **self.extras,
        }

    def write(self) -> None:
        cfg = self.config
        if cfg.out_csv:
            Path(cfg.out_csv).write_text(self.to_csv())
            if self.curves:
                Path(cfg.out_csv).with_suffix(".curves.csv").write_text(self.curves_csv())
        json_path = cfg.out_json or (str(Path(cfg.out_csv).with_suffix(".json")) if cfg.out_csv else None)
        if json_path:
            Path(json_path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


# -- lower bounds ---------------------------------------------------------------

_TWO_SIDED_ALGOS = {
    AdvGeometry.L2: ("agd_smoothed", "random_probe", "constant"),
    AdvGeometry.L1: ("mirror_prox", "random_probe", "constant"),
}
_ONE_SIDED_ALGOS = ("perceptron", "subgradient", "random_probe", "constant")


def build_algorithm(cfg: ExperimentConfig, seed: int) -> Algorithm:
    name = cfg.algorithm
    if cfg.mode is Mode.LOWER_ONESIDED:
        n, d = cfg.T + 1, cfg.d
        if name == "perceptron":
            return PerceptronAlgorithm(d)
        if name == "subgradient":
            return SubgradientAlgorithm(d, max(cfg.T, 1))
        if name == "random_probe":
            return RandomProbeAlgorithm(OracleKind.ONE_SIDED, n, d, seed)
        if name == "constant":
            return ConstantAlgorithm(OracleKind.SUPERGRADIENT, n, d)
        raise ValueError(f"unknown one-sided algorithm {name!r}; choose from {_ONE_SIDED_ALGOS}")
    geometry = AdvGeometry(cfg.mode.value)
    if name not in _TWO_SIDED_ALGOS[geometry]:
        raise ValueError(f"algorithm {name!r} is not available in {geometry.value} mode; "
                         f"choose from {_TWO_SIDED_ALGOS[geometry]}")
    if name == "agd_smoothed":
        return SmoothedAGDAlgorithm(cfg.n, cfg.d, SmoothingConfig.for_accuracy(cfg.eps, cfg.n))
    if name == "mirror_prox":
        return ReducedAlgorithm(MirrorProxAlgorithm(cfg.n, 2 * cfg.d), cfg.d)
    if name == "random_probe":
        return RandomProbeAlgorithm(OracleKind.TWO_SIDED, cfg.n, cfg.d, seed)
    return ConstantAlgorithm(OracleKind.TWO_SIDED, cfg.n, cfg.d)


def _adversary_seed(seed: int, attempt: int) -> int:
    # attempt 0 is the seed itself; retries get disjoint 64-bit keys
    return seed if attempt == 0 else (attempt << 40) ^ seed


def run_lower_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    """One adversary/algorithm interaction of exactly ``T`` queries, finalized and certified."""
    start = time.perf_counter()
    alg = build_algorithm(cfg, seed)
    if cfg.mode is Mode.LOWER_ONESIDED:
        adv = OneSidedAdversary(cfg.T, cfg.d)
        transcript = drive_interaction(alg, adv, cfg.T)
        transcript.seed = seed
        A, cert = adv.finalize(transcript.final_output, transcript, cfg.tol_replay,
                               min(cfg.tol_nonsep, 1e-12), cfg.tol_witness)
        cert.seed = seed
        return SeedResult(seed, A, transcript, cert, time.perf_counter() - start)
    params = make_params(cfg.T, cfg.n, cfg.d, cfg.delta, AdvGeometry(cfg.mode.value), strict=False)
    attempts = RESAMPLE_ATTEMPTS if cfg.resample else 1
    for attempt in range(attempts):
        adv = TwoSidedAdversary(params, _adversary_seed(seed, attempt))
        transcript = drive_interaction(alg, adv, cfg.T)
        A, _, cert = adv.finalize(transcript.final_output, transcript, cfg.tol_replay,
                                  cfg.tol_nonsep, cfg.tol_witness)
        if cert.all_pass:
            break
    result = SeedResult(seed, A, transcript, cert, 0.0,
                        resampled_from=seed if attempt > 0 else None)
    cert.seed = seed
    if cfg.probe:
        result.probe_value = probe_nonseparation(adv)
    result.wall_clock = time.perf_counter() - start
    return result


def run_lower_bound(cfg: ExperimentConfig) -> RunSummary:
    """Sweep the seed range; one certificate row per seed."""
    if cfg.mode not in (Mode.LOWER_L2, Mode.LOWER_L1, Mode.LOWER_ONESIDED):
        raise ValueError(f"mode {cfg.mode.value} is not a lower-bound mode")
    fields = list(CSV_FIELDS) + (["resampled"] if cfg.resample else [])
    rows, passes, clock, probes = [], [], [], []
    for seed in cfg.seed_list():
        res = run_lower_seed(cfg, seed)
        row = res.certificate.csv_row()
        if cfg.resample:
            row["resampled"] = str(res.resampled_from is not None).lower()
        rows.append(row)
        passes.append(res.certificate.all_pass)
        clock.append(res.wall_clock)
        if res.probe_value is not None:
            probes.append({"seed": seed, "best_min_payoff": res.probe_value})
        log.info("seed %d: all_pass=%s", seed, res.certificate.all_pass)
    extras: dict[str, Any] = {}
    if cfg.mode is not Mode.LOWER_ONESIDED:
        params = make_params(cfg.T, cfg.n, cfg.d, cfg.delta, AdvGeometry(cfg.mode.value), strict=False)
        extras["params"] = params.as_dict()
        extras["sufficient_n"] = nonsep_min_rows(cfg.T, params.delta)
        extras["norm_constraint_value"] = params.norm_constraint()
    if cfg.resample:
        extras["distribution_altering"] = True
    if probes:
        extras["nonseparation_probe"] = probes
    return RunSummary(cfg, rows, fields, passes, clock, extras)


# -- upper bounds ---------------------------------------------------------------

def planted_margin_instance(n: int, d: int, margin: float, rng: np.random.Generator) -> tuple[GameInstance, np.ndarray]:
    """Unit rows ``margin * w* + sqrt(1 - margin^2) z_l`` with unit ``z_l`` orthogonal to ``w*``.

    ``w*`` then has payoff exactly ``margin`` on every row.
    """
    if not 0 < margin <= 1:
        raise ValueError("margin must lie in (0, 1]")
    if d < 2:
        raise ValueError("need d >= 2")
    w_star = rng.standard_normal(d)
    w_star /= np.linalg.norm(w_star)
    Z = rng.standard_normal((n, d))
    Z -= np.outer(Z @ w_star, w_star)
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    A = margin * w_star + math.sqrt(1.0 - margin * margin) * Z
    A /= np.maximum(np.linalg.norm(A, axis=1, keepdims=True), 1.0)
    return GameInstance(A, Geometry.L2_BALL, NormContract.UNIT_ROWS), w_star


def onesided_instance(T: int, d: int, probe_seed: int) -> tuple[GameInstance, float]:
    """A finalized one-sided adversary matrix (margin ``1/sqrt(T+1)``) built against a random prober."""
    adv = OneSidedAdversary(T, d)
    transcript = drive_interaction(RandomProbeAlgorithm(OracleKind.ONE_SIDED, T + 1, d, probe_seed), adv, T)
    A, _ = adv.finalize(transcript.final_output, transcript)
    return A, 1.0 / math.sqrt(T + 1)


def run_upper_rate(cfg: ExperimentConfig) -> RunSummary:
    """Run a solver on instances with known structure and log its value curve.

    perceptron: finalized one-sided matrices, checks the ``ceil(1/gamma^2)`` update bound.
    agd_smoothed: planted-margin instances (margin ``cfg.eps``), budget ``100 sqrt(ln n)/margin``.
    mirror_prox: random ``[-1, 1]`` simplex games, compares the gap after ``T`` and ``4T`` iterations.
    """
    rows, passes, clock, curves = [], [], [], []
    fields = ["seed", "algorithm", "n", "d", "iterations", "oracle_calls", "final_value", "bound", "pass"]
    for seed in cfg.seed_list():
        start = time.perf_counter()
        rng = np.random.Generator(np.random.Philox(seed))
        if cfg.algorithm == "perceptron":
            A, gamma = onesided_instance(cfg.T, cfg.d, seed)
            bound = math.ceil(1.0 / gamma**2 - 1e-9)
            rep = perceptron(DenseOracle(A), bound + 1)
            iters = rep.logical_iterations
            value = min_payoff(A, rep.final_w)[0]
            ok = iters <= bound and value > 0
        elif cfg.algorithm == "agd_smoothed":
            margin = cfg.eps
            A, _ = planted_margin_instance(cfg.n, cfg.d, margin, rng)
            bound = math.ceil(100 * math.sqrt(math.log(cfg.n)) / margin)
            budget = cfg.T or bound
            rep = agd_smoothed(DenseOracle(A), budget, SmoothingConfig.for_accuracy(margin, cfg.n))
            hits = [k + 1 for k, v in enumerate(rep.per_iteration_values) if v > 0]
            iters = hits[0] if hits else rep.logical_iterations
            value = max(rep.per_iteration_values)
            ok = bool(hits) and iters <= bound
        elif cfg.algorithm == "mirror_prox":
            A = GameInstance(rng.uniform(-1, 1, (cfg.n, cfg.d)), Geometry.SIMPLEX, NormContract.UNIT_ENTRIES)
            rep, _ = mirror_prox(DenseOracle(A), 4 * cfg.T)
            iters = rep.logical_iterations
            value = rep.per_iteration_values[-1]
            bound = rep.per_iteration_values[cfg.T - 1]
            ok = value <= bound
        else:
            raise ValueError(f"unknown solver {cfg.algorithm!r}")
        rows.append({"seed": seed, "algorithm": cfg.algorithm, "n": A.n, "d": A.d,
                     "iterations": iters, "oracle_calls": rep.oracle_calls,
                     "final_value": repr(float(value)), "bound": repr(float(bound)),
                     "pass": str(bool(ok)).lower()})
        curves.extend({"seed": seed, "iteration": k + 1, "value": repr(float(v))}
                      for k, v in enumerate(rep.per_iteration_values))
        passes.append(bool(ok))
        clock.append(time.perf_counter() - start)
    return RunSummary(cfg, rows, fields, passes, clock, curves=curves)


# -- statistical and spectral checks --------------------------------------------

@dataclass
class TailRow:
    z: float
    test: str
    empirical: float
    bound: float
    slack: float
    passed: bool


def _binomial_slack(bound: float, trials: int) -> float:
    p = min(max(bound, 0.0), 1.0)
    return 3.0 * math.sqrt(p * (1.0 - p) / trials)


def stat_test_projected_gaussian(q: int, basis_size: int, beta: float, trials: int,
                                 z_list, seed: int = 0, batch: int = 10_000) -> dict[str, Any]:
    """Monte Carlo tails of ``x = beta (I - M M^T) xi`` for a random orthonormal ``M``.

    Compares ``Pr(|x|_inf >= z)`` with ``2q exp(-z^2 / (2 beta^2))`` and, when
    ``basis_size < q/2``, ``Pr(|x|_inf / |x|_2 >= z / sqrt q)`` with
    ``2q exp(-z^2/8) + exp(-q/48)``.  A row passes when the empirical frequency
    is at most the bound plus three binomial standard deviations.
    """
    if q < 1 or not 0 <= basis_size <= q:
        raise ValueError(f"need 0 <= basis_size <= q and q >= 1, got q={q}, basis_size={basis_size}")
    if trials < 1 or beta < 0:
        raise ValueError("trials must be positive and beta nonnegative")
    z_arr = np.asarray(list(z_list), dtype=float)
    rng = np.random.Generator(np.random.Philox(seed))
    if basis_size:
        M, _ = np.linalg.qr(rng.standard_normal((q, basis_size)))
    else:
        M = np.zeros((q, 0))
    inf_hits = np.zeros(z_arr.size)
    ratio_hits = np.zeros(z_arr.size)
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        xi = rng.standard_normal((m, q))
        X = beta * (xi - (xi @ M) @ M.T)
        inf = np.abs(X).max(axis=1)
        l2 = np.linalg.norm(X, axis=1)
        ratio = np.divide(inf, l2, out=np.zeros_like(inf), where=l2 > 0)
        inf_hits += (inf[:, None] >= z_arr[None, :]).sum(axis=0)
        ratio_hits += (ratio[:, None] >= z_arr[None, :] / math.sqrt(q)).sum(axis=0)
        done += m
    rows = []
    for k, z in enumerate(z_arr):
        bound = 0.0 if beta == 0 else 2 * q * math.exp(-z * z / (2 * beta * beta))
        emp = float(inf_hits[k] / trials)
        slack = _binomial_slack(bound, trials)
        rows.append(TailRow(float(z), "sup_norm", emp, bound, slack, bool(emp <= bound + slack)))
        if 2 * basis_size < q:
            bound = 2 * q * math.exp(-z * z / 8) + math.exp(-q / 48)
            emp = float(ratio_hits[k] / trials)
            slack = _binomial_slack(bound, trials)
            rows.append(TailRow(float(z), "ratio", emp, bound, slack, bool(emp <= bound + slack)))
    return {
        "q": q, "basis_size": basis_size, "beta": beta, "trials": trials, "seed": seed,
        "rows": [asdict(r) for r in rows],
        "passed": all(r.passed for r in rows),
    }


def psd_scan(T_max: int, tol: float = 1e-9, over: float = 1.05) -> dict[str, Any]:
    """Smallest eigenvalue of the shifted tridiagonal matrix at ``1/sqrt T`` and just above it."""
    if T_max < 2:
        raise ValueError("T_max must be at least 2")
    rows = []
    for T in range(2, T_max + 1):
        at = tridiag_psd_margin(T, 1.0 / math.sqrt(T))
        above = tridiag_psd_margin(T, over / math.sqrt(T))
        rows.append({"T": T, "margin_at": at, "margin_above": above,
                     "passed": bool(at >= -tol and above < 0)})
    return {"T_max": T_max, "rows": rows, "passed": all(r["passed"] for r in rows)}
