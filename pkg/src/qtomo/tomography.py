"""Reconstruction engines: state, detector, process, instrument, self-calibration.

Every engine solves the linear response system tr(rho P_k) = p_k in a real
Hermitian parametrization by (optionally weighted) least squares and then
projects onto the feasible cone: densities are clipped to PSD with the trace
fixed to the measured intensity, measure elements are clipped and the
identity deficit redistributed, channels may be clipped to completely
positive.  Reports carry the residual, the design condition number, how far
the projection moved the estimate, and warning flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import (
    apply_superop,
    choi_rank,
    choi_transform,
    superop_from_choi,
)
from .errors import ContractViolation, RankDeficiencyError
from .measures import Detector, QuantumMeasure, informational_completeness
from .ops import as_square, hermitian_basis

COND_WARN = 1e6
_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ReconstructionReport:
    residual: float
    cond: float
    projection_distance: float
    rank: int
    flags: tuple = ()
    extras: dict = field(default_factory=dict)


def _design_rows(operators, basis):
    """Real design matrix M[k, a] = tr(B_a O_k) for Hermitian operators O_k."""
    ops = np.stack([as_square(o) for o in operators])
    bas = np.stack(basis)
    m = np.einsum("aij,kji->ka", bas, ops)
    return m.real


def _weighted(m, y, stderr):
    if stderr is None:
        return m, y
    err = np.asarray(stderr, dtype=float)
    if err.shape != y.shape:
        raise ContractViolation("standard errors must match the rate vector")
    if np.all(err == 0.0):
        return m, y
    floor = max(err.max() * 1e-6, 1e-300)
    w = 1.0 / np.clip(err, floor, None)
    return m * w[:, None], y * w


def _solve_hermitian(operators, rates, stderr, what):
    """Least-squares Hermitian solve of tr(X O_k) = rates_k; returns diagnostics."""
    ops = [as_square(o) for o in operators]
    d = ops[0].shape[0]
    basis = hermitian_basis(d)
    m = _design_rows(ops, basis)
    sing = np.linalg.svd(m, compute_uv=False)
    rank = int(np.sum(sing > sing[0] * _RANK_RTOL)) if sing.size and sing[0] > 0 else 0
    if rank < d * d:
        raise RankDeficiencyError(
            f"{what} design is not informationally complete: rank {rank} < {d * d}",
            rank=rank,
            required=d * d,
        )
    cond = float(sing[0] / sing[rank - 1])
    y = np.asarray(rates, dtype=float)
    if y.shape != (len(ops),):
        raise ContractViolation(
            f"{what}: got {y.shape} rates for {len(ops)} design operators"
        )
    mw, yw = _weighted(m, y, stderr)
    coeff, *_ = np.linalg.lstsq(mw, yw, rcond=None)
    x = np.tensordot(coeff, np.stack(basis), axes=(0, 0))
    residual = float(np.linalg.norm(m @ coeff - y))
    return x, residual, cond, rank


def project_psd(x, trace_target=None):
    """Clip negative eigenvalues; optionally rescale the trace.

    Returns (projected matrix, Frobenius distance moved).  Idempotent: a
    matrix already in the cone with the right trace is returned unchanged.
    """
    h = as_square(x)
    h = 0.5 * (h + h.conj().T)
    evals, evecs = np.linalg.eigh(h)
    clipped = np.clip(evals, 0.0, None)
    out = (evecs * clipped) @ evecs.conj().T
    if trace_target is not None:
        tr = float(np.trace(out).real)
        if tr > 0.0:
            out = out * (trace_target / tr)
        elif trace_target > 0.0:
            out = np.zeros_like(out)
    dist = float(np.linalg.norm(out - as_square(x)))
    return out, dist


def _rate_residual(operators, x, rates):
    pred = np.einsum("kij,ji->k", np.stack(operators), x).real
    return float(np.linalg.norm(pred - np.asarray(rates, dtype=float)))


def state_tomography(measures, rates, stderr=None):
    """Reconstruct a density matrix from response rates of known measures.

    measures is one QuantumMeasure or a sequence of them; rates (and
    optional standard errors) are concatenated in the same element order.
    The unconstrained Hermitian solution is projected to the PSD cone with
    its trace fixed to the measured intensity, so exact rates from a valid
    state are reproduced and sampled rates always yield a valid state.
    """
    if isinstance(measures, QuantumMeasure):
        measures = [measures]
    operators = [p for m in measures for p in m.elements]
    y = np.asarray(rates, dtype=float).reshape(-1)
    x, residual, cond, rank = _solve_hermitian(operators, y, stderr, "state tomography")
    intensity = float(y.sum()) / len(measures)
    rho, dist = project_psd(x, trace_target=intensity)
    flags = []
    if cond > COND_WARN:
        flags.append("ill_conditioned")
    if dist > 1e-12 * max(1.0, abs(intensity)):
        flags.append("projected")
    residual_after = _rate_residual(operators, rho, y)
    report = ReconstructionReport(
        residual_after, cond, dist, rank, tuple(flags),
        {"residual_unprojected": residual, "intensity": intensity},
    )
    return rho, report


def detector_tomography(probe_states, rates, stderr=None):
    """Reconstruct a quantum measure from per-probe, per-element rates.

    probe_states must contain at least d^2 states with linearly independent
    density matrices; rates has shape (n_probes, K).  Each element is solved
    separately, clipped to PSD, and the identity deficit is spread over the
    elements in proportion to their traces, then clipped again.
    """
    probes = [as_square(p, "probe state") for p in probe_states]
    table = np.asarray(rates, dtype=float)
    if table.ndim != 2 or table.shape[0] != len(probes):
        raise ContractViolation(
            f"rates must be (n_probes, K), got {table.shape} for {len(probes)} probes"
        )
    err = None if stderr is None else np.asarray(stderr, dtype=float)
    n_k = table.shape[1]
    elements = []
    residual_sq = 0.0
    dist_sq = 0.0
    cond = 0.0
    rank = 0
    for k in range(n_k):
        col_err = None if err is None else err[:, k]
        x, res, cond, rank = _solve_hermitian(probes, table[:, k], col_err, "detector tomography")
        p, dist = project_psd(x)
        elements.append(p)
        residual_sq += res ** 2
        dist_sq += dist ** 2
    d = probes[0].shape[0]
    # Spread the identity deficit over the elements in proportion to their
    # traces, re-clip, and repeat: clipping can reopen a small deficit when
    # elements are rank deficient, and the cycle contracts it quickly.
    for _ in range(100):
        deficit = np.eye(d, dtype=complex) - np.sum(elements, axis=0)
        if np.max(np.abs(deficit)) <= 1e-12:
            break
        traces = np.array([max(float(np.trace(p).real), 0.0) for p in elements])
        if traces.sum() <= 0.0:
            break
        shares = traces / traces.sum()
        redistributed = []
        for share, p in zip(shares, elements):
            q, extra = project_psd(p + share * deficit)
            redistributed.append(q)
            dist_sq += extra ** 2
        elements = redistributed
    measure = QuantumMeasure(elements)
    flags = []
    if cond > COND_WARN:
        flags.append("ill_conditioned")
    report = ReconstructionReport(
        float(np.sqrt(residual_sq)), cond, float(np.sqrt(dist_sq)), rank, tuple(flags),
        {"sum_defect": measure.sum_defect()},
    )
    return measure, report


def process_tomography(probe_states, output_states, project_cp=False, cp_tol=1e-9):
    """Reconstruct the superoperator mapping probe states to output states.

    The probes must span the space of Hermitian operators.  With exact data
    from a completely positive map the returned matrix reproduces the map;
    optionally the estimate is projected to the CP cone by clipping Choi
    eigenvalues.
    """
    probes = [as_square(p, "probe state") for p in probe_states]
    outs = [as_square(o, "output state") for o in output_states]
    if len(probes) != len(outs):
        raise ContractViolation(
            f"{len(probes)} probes but {len(outs)} reconstructed outputs"
        )
    d = probes[0].shape[0]
    v = np.stack([p.reshape(-1) for p in probes], axis=1)
    w = np.stack([o.reshape(-1) for o in outs], axis=1)
    sing = np.linalg.svd(v, compute_uv=False)
    rank = int(np.sum(sing > sing[0] * _RANK_RTOL)) if sing.size and sing[0] > 0 else 0
    if rank < d * d:
        raise RankDeficiencyError(
            f"probe states do not span Hermitian space: rank {rank} < {d * d}",
            rank=rank,
            required=d * d,
        )
    cond = float(sing[0] / sing[rank - 1])
    e = w @ np.linalg.pinv(v)
    residual = float(np.linalg.norm(e @ v - w))
    dist = 0.0
    flags = []
    if project_cp:
        choi = choi_transform(e)
        choi = 0.5 * (choi + choi.conj().T)
        evals, evecs = np.linalg.eigh(choi)
        if evals[0] < -cp_tol:
            flags.append("cp_projected")
        clipped = (evecs * np.clip(evals, 0.0, None)) @ evecs.conj().T
        e_proj = superop_from_choi(clipped)
        dist = float(np.linalg.norm(e_proj - e))
        e = e_proj
        residual = float(np.linalg.norm(e @ v - w))
    if cond > COND_WARN:
        flags.append("ill_conditioned")
    report = ReconstructionReport(
        residual, cond, dist, rank, tuple(flags),
        {"choi_rank": choi_rank(e, cp_tol)},
    )
    return e, report


def instrument_tomography(joint_tables, probe_states, second_detector: Detector,
                          min_branch_rate=1e-12, project_cp=False):
    """Reconstruct the branch maps of an instrument from coincidence tables.

    joint_tables has shape (n_probes, J+1, K+1): for each probe state, the
    joint rates over (branch j, element k) with j = 0 the null branch and
    k = 0 the null detection slot.  For each responding branch the
    postselected element rates are inverted to the unnormalized conditional
    output state (second detector must be informationally complete), and the
    branch map follows by process tomography over the probes.  Branch 0 with
    no recorded rate is returned as the zero map; an ordinary branch without
    events is an error.
    """
    tables = np.asarray(joint_tables, dtype=float)
    probes = [as_square(p, "probe state") for p in probe_states]
    if tables.ndim != 3 or tables.shape[0] != len(probes):
        raise ContractViolation(
            f"joint tables must be (n_probes, J+1, K+1), got {tables.shape}"
        )
    measure = second_detector.measure
    if tables.shape[2] != len(measure) + 1:
        raise ContractViolation(
            f"tables have {tables.shape[2] - 1} element slots for a "
            f"{len(measure)}-element detector"
        )
    comp = informational_completeness(measure)
    if not comp.complete:
        raise RankDeficiencyError(
            f"second detector is not informationally complete: rank {comp.rank}",
            rank=comp.rank,
            required=measure.dim ** 2,
        )
    d = measure.dim
    n_branches = tables.shape[1]
    branch_maps = []
    marginals = tables.sum(axis=2)  # (n_probes, J+1)
    flags = []
    residual_sq = 0.0
    dist_sq = 0.0
    worst_cond = 0.0
    for j in range(n_branches):
        if marginals[:, j].max() <= min_branch_rate:
            if j == 0:
                branch_maps.append(np.zeros((d * d, d * d), dtype=complex))
                flags.append("null_branch_zero")
                continue
            raise ContractViolation(
                f"insufficient events for branch {j}: no probe recorded a response"
            )
        outputs = []
        for ell in range(len(probes)):
            rates = tables[ell, j, 1:]
            out, rep = state_tomography(measure, rates)
            outputs.append(out)
            residual_sq += rep.residual ** 2
        e, rep = process_tomography(probes, outputs, project_cp=project_cp)
        worst_cond = max(worst_cond, rep.cond)
        residual_sq += rep.residual ** 2
        dist_sq += rep.projection_distance ** 2
        branch_maps.append(e)
    predicted = np.stack(
        [[np.trace(apply_superop(e, p)).real for e in branch_maps] for p in probes]
    )
    report = ReconstructionReport(
        float(np.sqrt(residual_sq)), worst_cond, float(np.sqrt(dist_sq)),
        d * d, tuple(flags),
        {"branch_marginals": marginals, "predicted_marginals": predicted},
    )
    return branch_maps, report


@dataclass(frozen=True)
class SelfCalibrationResult:
    filters: list
    sources: list
    residual: float
    residual_history: np.ndarray
    iterations: int
    converged: bool


def _als_filter_step(outputs, sources):
    v = np.stack([s.reshape(-1) for s in sources], axis=1)
    vpinv = np.linalg.pinv(v)
    return [np.stack([o.reshape(-1) for o in outs], axis=1) @ vpinv for outs in outputs]


def _als_source_step(outputs, filters, basis):
    d = basis[0].shape[0]
    n_sources = outputs.shape[1]
    bas = np.stack([b.reshape(-1) for b in basis], axis=1)
    design = np.concatenate([f @ bas for f in filters], axis=0)
    a = np.concatenate([design.real, design.imag], axis=0)
    sources = []
    for ell in range(n_sources):
        b = np.concatenate([outputs[k, ell].reshape(-1) for k in range(outputs.shape[0])])
        rhs = np.concatenate([b.real, b.imag])
        coeff, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        sources.append(np.tensordot(coeff, np.stack(basis), axes=(0, 0)))
    return sources


def _als_residual(outputs, filters, sources):
    total = 0.0
    for k, f in enumerate(filters):
        for ell, s in enumerate(sources):
            total += np.linalg.norm(apply_superop(f, s) - outputs[k, ell]) ** 2
    return float(np.sqrt(total))


def self_calibrating_tomography(outputs, init_filters, init_sources,
                                rtol=1e-10, max_iter=100):
    """Jointly fit filter maps and source states to filtered-output data.

    outputs[k, l] is the reconstructed state of source l after filter k.
    Starting from the given guesses, alternating least squares updates all
    filters with sources held fixed (a linear solve) and then all sources
    with filters held fixed (linear in a Hermitian parametrization); the
    data residual is nonincreasing.  The overall filter/source scale is not
    identifiable, so after each sweep the first source's trace is pinned to
    the trace of its initial guess.  Stops when the residual change drops
    below rtol (relative) or after max_iter sweeps, flagging non-convergence.
    """
    data = np.asarray(outputs, dtype=complex)
    if data.ndim != 4:
        raise ContractViolation("outputs must have shape (n_filters, n_sources, d, d)")
    n_filters, n_sources = data.shape[:2]
    if n_filters < 2 or n_sources < 2:
        raise ContractViolation("self-calibration needs at least 2 filters and 2 sources")
    filters = [as_square(f, "filter superoperator").copy() for f in init_filters]
    sources = [as_square(s, "source state").copy() for s in init_sources]
    if len(filters) != n_filters or len(sources) != n_sources:
        raise ContractViolation("initial guesses must match the output grid")
    d = data.shape[2]
    basis = hermitian_basis(d)
    gauge_trace = float(np.trace(sources[0]).real)
    if gauge_trace <= 0.0:
        raise ContractViolation("first source must have positive intensity to fix the gauge")

    history = [_als_residual(data, filters, sources)]
    converged = history[0] <= 1e-14
    iterations = 0
    while not converged and iterations < max_iter:
        filters = _als_filter_step(data, sources)
        sources = _als_source_step(data, filters, basis)
        tr = float(np.trace(sources[0]).real)
        if abs(tr) > 1e-300:
            lam = gauge_trace / tr
            sources = [lam * s for s in sources]
            filters = [f / lam for f in filters]
        iterations += 1
        history.append(_als_residual(data, filters, sources))
        change = history[-2] - history[-1]
        if abs(change) <= rtol * max(1.0, history[-2]):
            converged = True
    return SelfCalibrationResult(
        filters, sources, history[-1], np.array(history), iterations, converged
    )
