"""Eavesdropper detection by discrimination statistics on signal states.

The receiver deploys the POVM that is optimal for the *honest* channel;
an interceptor garbles the line into ``A = E o B``, which can only lower
the success rate of that fixed measurement.  Detection is a likelihood
ratio test on the empirical success count against the honest and tampered
analytic rates, with an inconclusive band of two standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sdp
from .blackwell import _bell_states, _equal_prior_ensemble, find_witness
from .channels import (
    DensityMatrix,
    QuantumChannel,
    channel_from_choi,
    channel_from_json,
    compose,
)
from .discrimination import (
    Ensemble,
    discriminate_through_channel,
    ensemble_from_json,
    process_ensemble,
    success_probability,
)
from .numerics import ValidationError


class GapNotFoundError(RuntimeError):
    """No tried ensemble distinguishes the honest channel from the tampered one."""


@dataclass(frozen=True)
class EveScenario:
    honest: QuantumChannel
    eve: QuantumChannel          # None when no interceptor is present
    ensemble: Ensemble
    signals: int
    seed: int

    def __post_init__(self):
        if self.signals < 1:
            raise ValidationError(f"signals must be >= 1, got {self.signals}")
        if self.ensemble.dims[0] != self.honest.dim:
            raise ValidationError(
                f"ensemble system dim {self.ensemble.dims[0]} != channel dim {self.honest.dim}"
            )
        if self.eve is not None and self.eve.dim != self.honest.dim:
            raise ValidationError(
                f"eve dim {self.eve.dim} != honest channel dim {self.honest.dim}"
            )


@dataclass(frozen=True)
class DetectionReport:
    analytic_p_honest: float
    analytic_p_tampered: float
    empirical_success_rate: float
    standard_error: float
    decision: str                 # honest | tampered | inconclusive
    log_likelihood_ratio: float


def effective_channel(scenario: EveScenario) -> QuantumChannel:
    """The garbled line A = E o B actually connecting the parties."""
    if scenario.eve is None:
        raise ValidationError("scenario has no eavesdropper channel")
    return compose(scenario.eve, scenario.honest)


def mix_channels(weighted) -> QuantumChannel:
    """Convex mixture of channels, via their Choi states."""
    pairs = [(float(w), ch) for w, ch in weighted]
    if not pairs:
        raise ValidationError("cannot mix an empty list of channels")
    total = sum(w for w, _ in pairs)
    if total <= 0:
        raise ValidationError(f"mixture weights sum to {total!r}")
    d = pairs[0][1].dim
    j = sum((w / total) * ch.choi.matrix for w, ch in pairs)
    return channel_from_choi(DensityMatrix((d, d), j))


@dataclass(frozen=True)
class DetectionEnsemble:
    ensemble: Ensemble
    p_honest: float
    p_tampered: float
    gap: float


def detection_ensemble(honest: QuantumChannel, eve: QuantumChannel,
                       k: int = 2, d_anc: int = None, restarts: int = 8,
                       seed=0, tol: float = sdp.DEFAULT_TOL) -> DetectionEnsemble:
    """Pick signal states whose distinguishability drops under tampering.

    Tries orthogonal maximally entangled signals first, then the full
    witness-search machinery; raises :class:`GapNotFoundError` when no
    tried ensemble separates the two channels.
    """
    if honest.dim != eve.dim:
        raise ValidationError(f"channel dims differ: {honest.dim} vs {eve.dim}")
    tampered = compose(eve, honest)
    d = honest.dim
    d_anc = int(d_anc) if d_anc else d

    bell = _bell_states(d, d_anc)
    if bell and k <= len(bell):
        ens = _equal_prior_ensemble((d, d_anc), bell[:k])
        p_h = discriminate_through_channel(ens, honest, tol=tol).p_max
        p_t = discriminate_through_channel(ens, tampered, tol=tol).p_max
        if p_h - p_t > 10.0 * tol:
            return DetectionEnsemble(ens, float(p_h), float(p_t), float(p_h - p_t))

    hit = find_witness(honest, tampered, k=k, d_anc=d_anc, restarts=restarts,
                       seed=seed, tol=tol)
    if hit is None:
        raise GapNotFoundError(
            "no ensemble found on which tampering degrades discrimination"
        )
    return DetectionEnsemble(hit.ensemble, hit.p_a, hit.p_b, hit.gap)


def _fixed_povm_rate(ens: Ensemble, ch: QuantumChannel, povm) -> float:
    return success_probability(process_ensemble(ens, ch), povm)


def simulate(scenario: EveScenario, tol: float = sdp.DEFAULT_TOL) -> DetectionReport:
    """Monte Carlo run of the detection protocol, deterministic per seed.

    The sender draws members by prior, the state crosses the actual
    channel (tampered when an eavesdropper is present), and the receiver
    measures the honest-optimal POVM; outcomes follow the Born rule.
    """
    honest = scenario.honest
    ens = scenario.ensemble
    disc = discriminate_through_channel(ens, honest, tol=tol)
    p_honest = disc.p_max
    povm = disc.povm

    actual = honest if scenario.eve is None else effective_channel(scenario)
    if scenario.eve is None:
        p_tampered = p_honest
    else:
        p_tampered = _fixed_povm_rate(ens, actual, povm)

    processed = process_ensemble(ens, actual)
    priors = np.array([p for p, _ in ens.members])
    priors = priors / priors.sum()
    k = len(priors)
    born = np.zeros((k, k))
    for i, (_, state) in enumerate(processed.members):
        for jdx, element in enumerate(povm.elements):
            born[i, jdx] = max(np.trace(element @ state.matrix).real, 0.0)
    born = born / born.sum(axis=1, keepdims=True)

    rng = np.random.default_rng(scenario.seed)
    n = int(scenario.signals)
    drawn = rng.choice(k, size=n, p=priors)
    u = rng.random(n)
    cdf = np.cumsum(born, axis=1)
    outcomes = (u[:, None] > cdf[drawn]).sum(axis=1)
    successes = int(np.sum(outcomes == drawn))
    rate = successes / n

    se = float(np.sqrt(rate * (1.0 - rate) / n))
    se_honest = float(np.sqrt(p_honest * (1.0 - p_honest) / n))
    if se_honest == 0.0:
        z = 0.0 if rate == p_honest else np.inf * np.sign(rate - p_honest)
    else:
        z = (rate - p_honest) / se_honest

    def clamp(p):
        return min(max(p, 1e-12), 1.0 - 1e-12)

    ph, pt = clamp(p_honest), clamp(p_tampered)
    llr = successes * np.log(pt / ph) + (n - successes) * np.log((1.0 - pt) / (1.0 - ph))

    if abs(z) < 2.0:
        decision = "inconclusive"
    elif llr > 0.0:
        decision = "tampered"
    else:
        decision = "honest"
    return DetectionReport(
        float(p_honest), float(p_tampered), float(rate), se, decision, float(llr)
    )


# ---------------------------------------------------------------------------
# Scenario JSON
# ---------------------------------------------------------------------------

def scenario_from_json(data: dict, tol: float = sdp.DEFAULT_TOL) -> EveScenario:
    if not isinstance(data, dict) or data.get("format", 1) != 1:
        raise ValidationError("malformed scenario JSON")
    try:
        honest = channel_from_json(data["honest"])
        raw_eve = data.get("eve")
        if raw_eve is None:
            eve = None
        elif isinstance(raw_eve, list):
            eve = mix_channels(
                [(entry["weight"], channel_from_json(entry["channel"])) for entry in raw_eve]
            )
        else:
            eve = channel_from_json(raw_eve)
        raw_ens = data.get("ensemble", "auto")
        if raw_ens == "auto":
            if eve is None:
                raise ValidationError("ensemble 'auto' needs an eavesdropper channel")
            ens = detection_ensemble(honest, eve, seed=data.get("seed", 0), tol=tol).ensemble
        else:
            ens = ensemble_from_json(raw_ens)
        return EveScenario(
            honest, eve, ens, int(data["signals"]), data.get("seed", 0)
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed scenario JSON: {exc}") from exc


def report_to_json(rep: DetectionReport) -> dict:
    return {
        "format": 1,
        "analytic_p_honest": rep.analytic_p_honest,
        "analytic_p_tampered": rep.analytic_p_tampered,
        "empirical_success_rate": rep.empirical_success_rate,
        "standard_error": rep.standard_error,
        "decision": rep.decision,
        "log_likelihood_ratio": rep.log_likelihood_ratio,
    }
