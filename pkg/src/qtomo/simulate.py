"""Seeded stochastic detection and coincidence events for tomography runs.

Randomness comes from numpy's Philox bit generator, a counter-based 64-bit
generator keyed directly with the run seed, so event logs are reproducible
across processes and platforms.  Shot ranges can be generated in chunks with
derived streams (the counter advanced to the chunk start, which therefore
sits on a 4-word block boundary); chunked output is identical to sequential
output.  Outcomes are drawn by inverse CDF on the cumulative probability
vector, one uniform per shot.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .channels import Instrument, kraus_apply
from .errors import ContractViolation
from .measures import Detector, response_probabilities
from .ops import as_square

GENERATOR_NAME = "philox4x64"
_PROB_TOL = 1e-9


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulated run: seed, shot count, unit-intensity source, device.

    The device is either a detector alone, or an instrument observed in
    coincidence with a second detector.
    """

    seed: int
    shots: int
    source: np.ndarray = field(repr=False)
    detector: Detector | None = None
    instrument: Instrument | None = None

    def __post_init__(self):
        if self.shots < 0:
            raise ContractViolation(f"shot count must be nonnegative, got {self.shots}")
        rho = as_square(self.source, "source")
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > _PROB_TOL:
            raise ContractViolation(f"source must have unit intensity, trace is {tr}")
        if self.detector is None:
            raise ContractViolation("config needs a detector (alone or after an instrument)")
        object.__setattr__(self, "source", rho)


@dataclass(frozen=True)
class EventLog:
    """Per-shot detection element labels; label 0 means null detection."""

    seed: int
    generator: str
    n_elements: int
    labels: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.labels.size

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_elements + 1)


@dataclass(frozen=True)
class CoincidenceLog:
    """Per-shot (instrument branch, detector element) label pairs.

    Branch label 0 is the appended null branch; element label 0 is a null
    detection at the second device.
    """

    seed: int
    generator: str
    n_branches: int
    n_elements: int
    labels: np.ndarray = field(repr=False)  # shape (shots, 2)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def counts(self) -> np.ndarray:
        n_cols = self.n_elements + 1
        flat = np.bincount(
            self.labels[:, 0] * n_cols + self.labels[:, 1],
            minlength=(self.n_branches + 1) * n_cols,
        )
        return flat.reshape(self.n_branches + 1, n_cols)


def _prepare_cdf(p):
    """Clip tiny negative rates, renormalize, and build the cumulative vector."""
    p = np.asarray(p, dtype=float)
    if p.min() < -_PROB_TOL:
        raise ContractViolation(f"probability {p.min():.3e} is negative beyond tolerance")
    if abs(p.sum() - 1.0) > _PROB_TOL * max(1, p.size):
        raise ContractViolation(f"probabilities sum to {p.sum()}, expected 1")
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    return np.cumsum(p)


def _uniforms(seed: int, start: int, n: int) -> np.ndarray:
    # Philox emits 4 words per counter block and one word per double, so a
    # derived stream for shots [start, start+n) advances start // 4 blocks.
    if start % 4:
        raise ContractViolation("derived shot streams must start on multiples of 4")
    bitgen = np.random.Philox(key=seed)
    if start:
        bitgen.advance(start // 4)
    return np.random.Generator(bitgen).random(n)


def _draw_labels(seed: int, shots: int, cdf, chunk_size=None) -> np.ndarray:
    if chunk_size is None or chunk_size >= shots:
        u = _uniforms(seed, 0, shots)
        return np.searchsorted(cdf, u, side="right")
    chunk_size = 4 * max(1, int(np.ceil(chunk_size / 4)))
    parts = []
    for start in range(0, shots, chunk_size):
        n = min(chunk_size, shots - start)
        parts.append(np.searchsorted(cdf, _uniforms(seed, start, n), side="right"))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def sample_detections(cfg: ExperimentConfig, chunk_size=None):
    """Draw per-shot detection labels; returns (EventLog, count vector).

    Labels are 1..K for the K measure elements (0 is reserved for null and
    cannot occur since a valid measure responds with total rate one).
    Identical configs give byte-identical logs.
    """
    if cfg.instrument is not None:
        raise ContractViolation("config with an instrument needs sample_coincidences")
    measure = cfg.detector.measure
    p = response_probabilities(measure, cfg.source, _PROB_TOL)
    cdf = _prepare_cdf(p)
    idx = _draw_labels(cfg.seed, cfg.shots, cdf, chunk_size)
    labels = (idx + 1).astype(np.int64)
    log = EventLog(cfg.seed, GENERATOR_NAME, len(measure), labels)
    return log, log.counts()


def joint_probabilities(instrument: Instrument, detector: Detector, rho, tol: float = _PROB_TOL):
    """Exact coincidence table p[j, k] = tr(P_k E_j(rho)) including null slots.

    Row j = 0 is the appended null branch; column k = 0 is the (never
    responding) null slot of the second detector.
    """
    rho = as_square(rho, "rho")
    branches = [instrument.null_kraus(tol)] + list(instrument.branches)
    k_elems = detector.measure.elements
    table = np.zeros((len(branches), k_elems.shape[0] + 1))
    for j, branch in enumerate(branches):
        out = kraus_apply(branch, rho)
        rates = np.einsum("kab,ba->k", k_elems, out)
        if np.max(np.abs(rates.imag)) > tol:
            raise ContractViolation("joint rates have a non-negligible imaginary part")
        table[j, 1:] = rates.real
    if table.min() < -tol:
        raise ContractViolation(f"negative joint rate {table.min():.3e}")
    return table


def sample_coincidences(cfg: ExperimentConfig, chunk_size=None):
    """Draw (branch, element) pairs for an instrument run; returns (log, table)."""
    if cfg.instrument is None:
        raise ContractViolation("coincidence sampling needs an instrument in the config")
    table = joint_probabilities(cfg.instrument, cfg.detector, cfg.source)
    flat = table.reshape(-1)
    cdf = _prepare_cdf(flat)
    idx = _draw_labels(cfg.seed, cfg.shots, cdf, chunk_size)
    n_cols = table.shape[1]
    labels = np.stack([idx // n_cols, idx % n_cols], axis=1).astype(np.int64)
    log = CoincidenceLog(
        cfg.seed, GENERATOR_NAME, len(cfg.instrument), len(cfg.detector.measure), labels
    )
    return log, log.counts()


@dataclass(frozen=True)
class EmpiricalRates:
    p_hat: np.ndarray
    stderr: np.ndarray


@dataclass(frozen=True)
class JointRates:
    table: np.ndarray
    stderr: np.ndarray
    branch_marginal: np.ndarray
    element_marginal: np.ndarray


def empirical_rates(log):
    """Relative frequencies with binomial standard errors sqrt(p(1-p)/N)."""
    n = len(log)
    if n == 0:
        raise ContractViolation("empty event log has no rates")
    counts = log.counts().astype(float)
    p = counts / n
    err = np.sqrt(p * (1.0 - p) / n)
    if isinstance(log, CoincidenceLog):
        return JointRates(p, err, p.sum(axis=1), p.sum(axis=0))
    return EmpiricalRates(p, err)


def event_log_to_csv(log) -> str:
    """Serialize a log with seed and generator header lines."""
    buf = io.StringIO()
    buf.write(f"# seed={log.seed}\n")
    buf.write(f"# generator={log.generator}\n")
    if isinstance(log, CoincidenceLog):
        buf.write(f"# n_branches={log.n_branches}\n")
        buf.write(f"# n_elements={log.n_elements}\n")
        buf.write("shot,j,k\n")
        for shot, (j, k) in enumerate(log.labels):
            buf.write(f"{shot},{j},{k}\n")
    else:
        buf.write(f"# n_elements={log.n_elements}\n")
        buf.write("shot,label\n")
        for shot, label in enumerate(log.labels):
            buf.write(f"{shot},{label}\n")
    return buf.getvalue()


def event_log_from_csv(text: str):
    """Inverse of event_log_to_csv for both log kinds."""
    header = {}
    rows = []
    columns = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
        elif line[0].isdigit():
            rows.append(tuple(int(x) for x in line.split(",")))
        else:
            columns = line.split(",")
    if columns is None:
        raise ContractViolation("event log is missing its column header")
    seed = int(header.get("seed", 0))
    generator = header.get("generator", GENERATOR_NAME)
    if columns == ["shot", "j", "k"]:
        labels = np.array([(j, k) for _, j, k in rows], dtype=np.int64).reshape(-1, 2)
        return CoincidenceLog(
            seed,
            generator,
            int(header.get("n_branches", labels[:, 0].max() if len(labels) else 0)),
            int(header.get("n_elements", labels[:, 1].max() if len(labels) else 0)),
            labels,
        )
    labels = np.array([label for _, label in rows], dtype=np.int64)
    return EventLog(
        seed,
        generator,
        int(header.get("n_elements", labels.max() if len(labels) else 0)),
        labels,
    )
