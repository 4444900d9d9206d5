"""Generalised quantum Otto cycle with explicit reservoir coupling/decoupling steps.

The cycle visits eight labelled points::

    A -> A' (couple hot)      A' -> B (hot isochore)     B -> B' (decouple hot)
    B' -> C (expansion)       C -> C' (couple cold)      C' -> D (cold isochore)
    D -> D' (decouple cold)   D' -> A (compression)

Every point energy is measured relative to the state in which both reservoirs
(and the residual environments left over by the reaction-coordinate mapping)
sit in their own Gibbs states. Within the RC picture the only reservoir
self-energy that survives this subtraction is the RC excess
``Omega (<a^dagger a>_joint - <a^dagger a>_thermal)``, both occupations taken
at the same Fock truncation. Weak coupling is the special case in which the
excess and the interaction energy vanish.

Work and heat follow the stroke bookkeeping: energy changes along the
isentropes and decoupling steps are work, energy changes along the isochores
are heat, and for adiabatic decoupling the decoupling energy change is split
into a free-energy (work) part and a dissipated-heat part that is booked on
the reservoir being removed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .linops import ProductSpace, expectation
from .model import (
    ReservoirSpec,
    RcMapping,
    TlsParams,
    interaction_operator,
    mapped_hamiltonian,
    rc_mapping,
    splitting,
    tls_hamiltonian,
)
from .thermo import (
    gibbs_state,
    ln_partition,
    rc_occupation,
    reduced_tls_state,
    thermal_rc_occupation,
)

FLOW_TOL = 1e-12
TRUNCATION_TOL = 1e-6
TRUNCATION_STEP = 5


class CouplingModel(enum.Enum):
    WEAK = "weak"
    RC_STRONG = "rc-strong"


class StrokeMode(enum.Enum):
    ADIABATIC = "adiabatic"
    SUDDEN = "sudden"


class DecouplingMode(enum.Enum):
    INSTANTANEOUS = "instantaneous"
    ADIABATIC = "adiabatic"


class Mode(enum.Enum):
    ENGINE = "engine"
    REFRIGERATOR = "refrigerator"
    NEITHER = "neither"


class Reservoir(enum.Enum):
    HOT = "hot"
    COLD = "cold"


@dataclass(frozen=True)
class CycleConfig:
    hot: ReservoirSpec
    cold: ReservoirSpec
    tls_hot: TlsParams
    tls_cold: TlsParams
    n: int = 30
    coupling_model: CouplingModel = CouplingModel.RC_STRONG
    stroke_mode: StrokeMode = StrokeMode.ADIABATIC
    decoupling_mode: DecouplingMode = DecouplingMode.INSTANTANEOUS

    def __post_init__(self):
        if not self.cold.beta > self.hot.beta:
            raise ValueError(
                f"cold reservoir must be colder than the hot one (beta_c={self.cold.beta} <= beta_h={self.hot.beta})"
            )
        if self.n < 1:
            raise ValueError(f"invalid Fock truncation n={self.n}; need n >= 1")
        # Both decoupling protocols cost nothing without system-reservoir correlations.
        if self.coupling_model is CouplingModel.WEAK:
            object.__setattr__(self, "decoupling_mode", DecouplingMode.INSTANTANEOUS)

    @property
    def mu_hot(self) -> float:
        return splitting(self.tls_hot)

    @property
    def mu_cold(self) -> float:
        return splitting(self.tls_cold)

    @property
    def carnot(self) -> float:
        return 1.0 - self.hot.beta / self.cold.beta


@dataclass(frozen=True)
class CyclePointEnergies:
    e_A: float
    e_Aprime: float
    e_B: float
    e_Bprime: float
    e_C: float
    e_Cprime: float
    e_D: float
    e_Dprime: float
    truncation_delta: float = 0.0
    converged: bool = True

    def as_array(self) -> np.ndarray:
        return np.array([
            self.e_A, self.e_Aprime, self.e_B, self.e_Bprime,
            self.e_C, self.e_Cprime, self.e_D, self.e_Dprime,
        ])

    def loop_residual(self) -> float:
        """Sum of the eight consecutive energy differences around the closed loop."""
        e = self.as_array()
        return float(np.sum(np.roll(e, -1) - e))


@dataclass(frozen=True)
class CycleResult:
    points: CyclePointEnergies
    w_net_on: float
    w_out: float
    q_hot: float
    q_cold: float
    w_decouple_hot: float
    w_decouple_cold: float
    q_decouple_hot: float
    q_decouple_cold: float
    eta: float | None
    mode: Mode
    n: int
    converged: bool = True

    @property
    def first_law_residual(self) -> float:
        return self.w_net_on + self.q_hot + self.q_cold


@dataclass(frozen=True)
class IsochoreEquilibrium:
    """End state of one isochore, split into the pieces the cycle ledger needs."""

    h_sys: np.ndarray
    mu: float
    beta: float
    mapping: RcMapping | None
    rho_sys: np.ndarray          # TLS state at the end of the isochore
    rho_canonical: np.ndarray    # bare Gibbs state of h_sys
    e_sys: float
    e_canonical: float
    e_reservoir: float           # RC self-energy in excess of its thermal value
    e_interaction: float
    ln_z_joint: float            # RC-reduced: ln Z(mapped H) with the residual bath factored out
    ln_z_sys: float
    ln_z_rc: float

    @property
    def decoupling_free_energy(self) -> float:
        return (self.ln_z_joint - self.ln_z_sys - self.ln_z_rc) / self.beta


def weak_isochore(tls: TlsParams, spec: ReservoirSpec) -> IsochoreEquilibrium:
    h = tls_hamiltonian(tls)
    state = gibbs_state(h, spec.beta)
    e = expectation(h, state.rho)
    return IsochoreEquilibrium(
        h_sys=h, mu=splitting(tls), beta=spec.beta, mapping=None,
        rho_sys=state.rho, rho_canonical=state.rho, e_sys=e, e_canonical=e,
        e_reservoir=0.0, e_interaction=0.0,
        ln_z_joint=state.ln_z, ln_z_sys=state.ln_z, ln_z_rc=0.0,
    )


def rc_isochore(tls: TlsParams, spec: ReservoirSpec, n: int) -> IsochoreEquilibrium:
    m = rc_mapping(spec, tls, n)
    space = ProductSpace(n)
    h = tls_hamiltonian(tls)
    h_big = mapped_hamiltonian(tls, m)
    joint = gibbs_state(h_big, spec.beta)
    rho_sys = reduced_tls_state(joint, space)
    canonical = gibbs_state(h, spec.beta)
    n_joint = rc_occupation(joint, space)
    n_thermal = thermal_rc_occupation(m.omega_rc, spec.beta, n)
    ln_z_rc = ln_partition(m.omega_rc * np.diag(np.arange(n, dtype=float)), spec.beta)
    return IsochoreEquilibrium(
        h_sys=h, mu=splitting(tls), beta=spec.beta, mapping=m,
        rho_sys=rho_sys, rho_canonical=canonical.rho,
        e_sys=expectation(h, rho_sys), e_canonical=expectation(h, canonical.rho),
        e_reservoir=m.omega_rc * (n_joint - n_thermal),
        e_interaction=expectation(interaction_operator(m), joint.rho),
        ln_z_joint=joint.ln_z, ln_z_sys=canonical.ln_z, ln_z_rc=ln_z_rc,
    )


def _decoupling_terms(iso: IsochoreEquilibrium, mode: DecouplingMode) -> tuple[float, float]:
    """(work, heat) of removing the reservoir after the isochore."""
    if mode is DecouplingMode.INSTANTANEOUS:
        return -iso.e_interaction, 0.0
    delta_e = iso.e_canonical - (iso.e_sys + iso.e_reservoir + iso.e_interaction)
    w = iso.decoupling_free_energy
    return w, delta_e - w


@dataclass(frozen=True)
class _Ledger:
    points: CyclePointEnergies
    w_dec_hot: float
    w_dec_cold: float
    q_dec_hot: float
    q_dec_cold: float


def _assemble_ledger(hot: IsochoreEquilibrium, cold: IsochoreEquilibrium,
                     stroke: StrokeMode, decoupling: DecouplingMode) -> _Ledger:
    def after_decoupling(iso):
        # TLS state, TLS energy, surviving reservoir excess once the interaction is off.
        if decoupling is DecouplingMode.INSTANTANEOUS:
            return iso.rho_sys, iso.e_sys, iso.e_reservoir
        return iso.rho_canonical, iso.e_canonical, 0.0

    def isentrope(src, dst, rho, e_sys, excess):
        if stroke is StrokeMode.ADIABATIC:
            return dst.mu / src.mu * e_sys + excess
        return expectation(dst.h_sys, rho) + excess

    e_B = hot.e_sys + hot.e_reservoir + hot.e_interaction
    rho_h, es_h, ex_h = after_decoupling(hot)
    e_Bp = es_h + ex_h
    e_C = isentrope(hot, cold, rho_h, es_h, ex_h)
    e_Cp = e_C
    e_D = cold.e_sys + cold.e_reservoir + cold.e_interaction
    rho_c, es_c, ex_c = after_decoupling(cold)
    e_Dp = es_c + ex_c
    e_A = isentrope(cold, hot, rho_c, es_c, ex_c)
    e_Ap = e_A

    w_h, q_h = _decoupling_terms(hot, decoupling)
    w_c, q_c = _decoupling_terms(cold, decoupling)
    points = CyclePointEnergies(e_A=e_A, e_Aprime=e_Ap, e_B=e_B, e_Bprime=e_Bp,
                                e_C=e_C, e_Cprime=e_Cp, e_D=e_D, e_Dprime=e_Dp)
    return _Ledger(points, w_h, w_c, q_h, q_c)


def _check_nondegenerate(cfg: CycleConfig) -> None:
    if cfg.mu_hot == 0 or cfg.mu_cold == 0:
        raise ValueError("TLS splitting must be non-zero at both isochores")


def _result_from_ledger(led: _Ledger, n: int, converged: bool = True) -> CycleResult:
    p = led.points
    w_net_on = (
        led.w_dec_hot + (p.e_C - p.e_Bprime) + (p.e_Cprime - p.e_C)
        + led.w_dec_cold + (p.e_A - p.e_Dprime) + (p.e_Aprime - p.e_A)
    )
    res = CycleResult(
        points=p,
        w_net_on=w_net_on,
        w_out=-w_net_on,
        q_hot=(p.e_B - p.e_Aprime) + led.q_dec_hot,
        q_cold=(p.e_D - p.e_Cprime) + led.q_dec_cold,
        w_decouple_hot=led.w_dec_hot,
        w_decouple_cold=led.w_dec_cold,
        q_decouple_hot=led.q_dec_hot,
        q_decouple_cold=led.q_dec_cold,
        eta=None,
        mode=Mode.NEITHER,
        n=n,
        converged=converged,
    )
    return replace(res, eta=efficiency(res), mode=classify(res))


def _weak_ledger(cfg: CycleConfig, stroke: StrokeMode) -> _Ledger:
    _check_nondegenerate(cfg)
    hot = weak_isochore(cfg.tls_hot, cfg.hot)
    cold = weak_isochore(cfg.tls_cold, cfg.cold)
    return _assemble_ledger(hot, cold, stroke, DecouplingMode.INSTANTANEOUS)


def weak_cycle_adiabatic(cfg: CycleConfig) -> CycleResult:
    """Factorised (weak-coupling) cycle with slow isentropes; decoupling is free."""
    return _result_from_ledger(_weak_ledger(cfg, StrokeMode.ADIABATIC), cfg.n)


def weak_cycle_sudden(cfg: CycleConfig) -> CycleResult:
    """Factorised cycle whose isentropes are instantaneous quenches of the TLS Hamiltonian."""
    return _result_from_ledger(_weak_ledger(cfg, StrokeMode.SUDDEN), cfg.n)


def _rc_ledger(cfg: CycleConfig, n: int) -> _Ledger:
    hot = rc_isochore(cfg.tls_hot, cfg.hot, n)
    cold = rc_isochore(cfg.tls_cold, cfg.cold, n)
    return _assemble_ledger(hot, cold, cfg.stroke_mode, cfg.decoupling_mode)


def _truncation_delta(a: CyclePointEnergies, b: CyclePointEnergies) -> float:
    ea, eb = a.as_array(), b.as_array()
    scale = float(np.max(np.abs(ea)))
    diff = float(np.max(np.abs(ea - eb)))
    if diff == 0.0:
        return 0.0
    return diff / scale if scale > 0 else math.inf


def _strong_ledger(cfg: CycleConfig) -> _Ledger:
    _check_nondegenerate(cfg)
    led = _rc_ledger(cfg, cfg.n)
    if cfg.n > TRUNCATION_STEP:
        ref = _rc_ledger(cfg, cfg.n - TRUNCATION_STEP)
        delta = _truncation_delta(led.points, ref.points)
    elif cfg.hot.alpha == 0 and cfg.cold.alpha == 0:
        delta = 0.0
    else:
        # Too few Fock states to compare against a smaller truncation.
        delta = math.inf
    points = replace(led.points, truncation_delta=delta, converged=delta <= TRUNCATION_TOL)
    return replace(led, points=points)


def strong_point_energies(cfg: CycleConfig) -> CyclePointEnergies:
    """Point energies from the enlarged (TLS + RC) Gibbs states of both isochores.

    The result carries a truncation check: the same energies recomputed with
    five fewer Fock states must agree to ``TRUNCATION_TOL`` relative to the
    largest point energy, otherwise ``converged`` is False.
    """
    return _strong_ledger(cfg).points


def strong_cycle(cfg: CycleConfig) -> CycleResult:
    led = _strong_ledger(cfg)
    return _result_from_ledger(led, cfg.n, led.points.converged)


def adiabatic_decoupling_terms(cfg: CycleConfig, which: Reservoir) -> tuple[float, float]:
    """Work (free-energy change) and dissipated heat for quasi-static removal of one reservoir.

    Their sum equals the energy change across the decoupling step.
    """
    if which is Reservoir.HOT:
        iso = rc_isochore(cfg.tls_hot, cfg.hot, cfg.n)
    else:
        iso = rc_isochore(cfg.tls_cold, cfg.cold, cfg.n)
    return _decoupling_terms(iso, DecouplingMode.ADIABATIC)


def classify(result: CycleResult, tol: float = FLOW_TOL) -> Mode:
    if result.w_out > tol and result.q_hot > tol:
        return Mode.ENGINE
    if result.w_out < -tol and result.q_cold > tol:
        return Mode.REFRIGERATOR
    return Mode.NEITHER


def efficiency(result: CycleResult, tol: float = FLOW_TOL) -> float | None:
    """Work output per unit energy drawn from the hot side, or None if nothing is drawn."""
    if result.q_hot > tol:
        return result.w_out / result.q_hot
    return None


def evaluate(cfg: CycleConfig) -> CycleResult:
    if cfg.coupling_model is CouplingModel.WEAK:
        if cfg.stroke_mode is StrokeMode.ADIABATIC:
            return weak_cycle_adiabatic(cfg)
        return weak_cycle_sudden(cfg)
    return strong_cycle(cfg)
