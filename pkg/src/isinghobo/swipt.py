"""RIS-assisted SWIPT phase-shift case study.

A single-antenna transmitter reaches an information receiver and an energy
harvesting (EH) receiver only through an N-element RIS with 1-bit phases
``x in {-1, +1}^N``. With channels ``h`` (Tx->RIS), ``g`` (RIS->info) and
``f`` (RIS->EH)::

    P_I = x^T R x,   R = P Re(a a^H),  a = g * h
    P_E = x^T J x,   J = P Re(b b^H),  b = f * h

The EH model maps input power (microwatt) to harvested power
``a1 p^2 + a2 p + a3``; the EH requirement ``delta`` becomes the threshold
``x^T J x >= c``.

All R/J entries and the threshold are in microwatt; noise power is in watt.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .constrained import ConstrainedProblem
from .hobo import QuadraticFormComposite
from .solvers import restart_rng

__all__ = [
    "ThresholdMode",
    "ScenarioConfig",
    "ChannelRealization",
    "SwiptInstance",
    "sample_channels",
    "build_instance",
    "eh_threshold",
    "eh_output",
    "eh_curve_max",
    "generate_instance",
    "to_constrained_problem",
    "dbm_to_watt",
    "db_to_linear",
    "friis_amplitude",
]

SPEED_OF_LIGHT = 299_792_458.0
UW_PER_W = 1e6
PAPER_EH_PARAMS = (-1.2006e-4, 0.6734, -3.5988)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def friis_amplitude(distance: float, freq: float, gain_tx: float = 1.0, gain_rx: float = 1.0) -> float:
    """Free-space amplitude gain ``sqrt(Gt Gr) * lambda / (4 pi d)`` (exponent 2, 1 m reference)."""
    wavelength = SPEED_OF_LIGHT / freq
    return math.sqrt(gain_tx * gain_rx) * wavelength / (4.0 * math.pi * distance)


class ThresholdMode(str, enum.Enum):
    QUADRATIC_ROOT = "quadratic_root"
    PAPER_FORMULA = "paper_formula"

    @classmethod
    def parse(cls, value) -> "ThresholdMode":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "").replace("_", "")
        aliases = {"quadraticroot": cls.QUADRATIC_ROOT, "paperformula": cls.PAPER_FORMULA}
        if key not in aliases:
            raise ValueError(f"unknown threshold mode {value!r}")
        return aliases[key]


@dataclass
class ScenarioConfig:
    n_elements: int = 10
    carrier_freq: float = 915e6
    tx_power: float = 10.0
    noise_power: float = 1e-9
    rician_k: float = db_to_linear(5.0)
    tx_gain_dbi: float = 8.0
    rx_gain_dbi: float = 0.0
    ris_tx_gain_dbi: float = 8.0
    tx_distance: float = 3.0
    tx_angle: float = math.pi / 4
    info_rx_distance_range: tuple[float, float] = (5.0, 30.0)
    eh_rx_distance_range: tuple[float, float] = (1.0, 2.5)
    eh_params: tuple[float, float, float] = PAPER_EH_PARAMS
    delta: float = 500.0
    threshold_mode: ThresholdMode = ThresholdMode.QUADRATIC_ROOT
    seed: int = 0

    def __post_init__(self):
        self.threshold_mode = ThresholdMode.parse(self.threshold_mode)
        self.info_rx_distance_range = tuple(self.info_rx_distance_range)
        self.eh_rx_distance_range = tuple(self.eh_rx_distance_range)
        self.eh_params = tuple(self.eh_params)
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if not self.tx_distance > 0 or min(self.info_rx_distance_range + self.eh_rx_distance_range) <= 0:
            raise ValueError("distances must be positive")
        if self.rician_k < 0:
            raise ValueError("rician_k must be non-negative")
        if not self.eh_params[0] < 0:
            raise ValueError("a1 must be negative (concave EH curve)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["threshold_mode"] = self.threshold_mode.value
        return d


@dataclass
class ChannelRealization:
    h: np.ndarray
    g: np.ndarray
    f: np.ndarray
    info_distance: float = 0.0
    eh_distance: float = 0.0
    channel_id: int = 0


@dataclass
class SwiptInstance:
    r_matrix: np.ndarray
    j_matrix: np.ndarray
    c: float
    noise_power: float
    delta: float = 500.0
    eh_params: tuple[float, float, float] = PAPER_EH_PARAMS
    threshold_mode: ThresholdMode = ThresholdMode.QUADRATIC_ROOT
    channel_id: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.r_matrix.shape[0]

    def info_power(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.r_matrix @ x)

    def eh_input_power(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.j_matrix @ x)

    def info_powers(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.einsum("mi,ij,mj->m", X, self.r_matrix, X)

    def eh_input_powers(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.einsum("mi,ij,mj->m", X, self.j_matrix, X)

    def snr(self, x) -> float:
        """Linear SNR ``x^T R x / N0`` (R converted back to watt)."""
        return self.info_power(x) / UW_PER_W / self.noise_power

    def feasibility_tol(self, rel: float = 1e-6) -> float:
        return rel * max(1.0, abs(self.c))

    def is_feasible(self, x, rel: float = 1e-6) -> bool:
        return self.eh_input_power(x) >= self.c - self.feasibility_tol(rel)

    def feasible_rows(self, X, rel: float = 1e-6) -> np.ndarray:
        return self.eh_input_powers(X) >= self.c - self.feasibility_tol(rel)

    def harvested(self, x) -> float:
        return eh_output(self.eh_params, self.eh_input_power(x))

    def to_json_dict(self) -> dict:
        return {
            "N": self.n,
            "R": self.r_matrix.reshape(-1).tolist(),
            "J": self.j_matrix.reshape(-1).tolist(),
            "c": self.c,
            "noise_power": self.noise_power,
            "channel_id": self.channel_id,
            "seed": self.seed,
            "threshold_mode": self.threshold_mode.value,
            "delta": self.delta,
            "eh_params": list(self.eh_params),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SwiptInstance":
        n = int(d["N"])
        return cls(
            r_matrix=np.asarray(d["R"], dtype=float).reshape(n, n),
            j_matrix=np.asarray(d["J"], dtype=float).reshape(n, n),
            c=float(d["c"]),
            noise_power=float(d["noise_power"]),
            delta=float(d.get("delta", 500.0)),
            eh_params=tuple(d.get("eh_params", PAPER_EH_PARAMS)),
            threshold_mode=ThresholdMode.parse(d.get("threshold_mode", "quadratic_root")),
            channel_id=int(d.get("channel_id", 0)),
            seed=int(d.get("seed", 0)),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "SwiptInstance":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def _steering(n: int, angle: float) -> np.ndarray:
    return np.exp(-1j * math.pi * np.arange(n) * math.sin(angle))


def _rician(los: np.ndarray, nlos: np.ndarray, k: float) -> np.ndarray:
    if math.isinf(k):
        return los.astype(complex)
    return math.sqrt(k / (1.0 + k)) * los + math.sqrt(1.0 / (1.0 + k)) * nlos


def sample_channels(cfg: ScenarioConfig, channel_id: int) -> ChannelRealization:
    """Draw one Rician realization of ``h``, ``g``, ``f``.

    One stream seeded by ``(cfg.seed, channel_id)`` supplies, in order: the
    info and EH receiver distances, their angles, then the NLOS parts of
    ``h``, ``g``, ``f``.
    """
    n = cfg.n_elements
    rng = restart_rng(cfg.seed, channel_id)
    d_info = rng.uniform(*cfg.info_rx_distance_range)
    d_eh = rng.uniform(*cfg.eh_rx_distance_range)
    th_info, th_eh = rng.uniform(-math.pi / 2, math.pi / 2, 2)
    nlos = (rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n))) / math.sqrt(2.0)

    # every hop is a Friis link: Tx -> RIS (RIS receives at 0 dBi), RIS -> receiver
    g_tx, g_rx = db_to_linear(cfg.tx_gain_dbi), db_to_linear(cfg.rx_gain_dbi)
    g_ris = db_to_linear(cfg.ris_tx_gain_dbi)
    amp_h = friis_amplitude(cfg.tx_distance, cfg.carrier_freq, gain_tx=g_tx)
    amp_g = friis_amplitude(d_info, cfg.carrier_freq, gain_tx=g_ris, gain_rx=g_rx)
    amp_f = friis_amplitude(d_eh, cfg.carrier_freq, gain_tx=g_ris, gain_rx=g_rx)
    h = amp_h * _rician(_steering(n, cfg.tx_angle), nlos[0], cfg.rician_k)
    g = amp_g * _rician(_steering(n, th_info), nlos[1], cfg.rician_k)
    f = amp_f * _rician(_steering(n, th_eh), nlos[2], cfg.rician_k)
    return ChannelRealization(h, g, f, d_info, d_eh, channel_id)


def eh_output(params, p_in: float) -> float:
    a1, a2, a3 = params
    return a1 * p_in * p_in + a2 * p_in + a3


def eh_curve_max(params) -> float:
    a1, a2, a3 = params
    return a3 - a2 * a2 / (4.0 * a1)


def eh_threshold(params, delta: float, mode=ThresholdMode.QUADRATIC_ROOT) -> float:
    """Input power (microwatt) at which the EH curve reaches ``delta``.

    ``QUADRATIC_ROOT`` returns the smaller root of ``a1 c^2 + a2 c + a3 = delta``.
    ``PAPER_FORMULA`` evaluates ``(-a2 + sqrt(4 a1 (a3 - delta))) / (2 a1)``
    literally, which omits ``a2**2`` under the radical.
    """
    a1, a2, a3 = params
    mode = ThresholdMode.parse(mode)
    if mode is ThresholdMode.QUADRATIC_ROOT:
        disc = a2 * a2 - 4.0 * a1 * (a3 - delta)
    else:
        disc = 4.0 * a1 * (a3 - delta)
    if disc < 0:
        raise ValueError(
            f"EH requirement {delta} uW is unattainable: the EH curve peaks at {eh_curve_max(params):.6g} uW"
        )
    return (-a2 + math.sqrt(disc)) / (2.0 * a1)


def eh_upper_root(params, delta: float) -> float:
    a1, a2, a3 = params
    disc = a2 * a2 - 4.0 * a1 * (a3 - delta)
    return (-a2 - math.sqrt(max(disc, 0.0))) / (2.0 * a1)


def _power_matrix(a: np.ndarray, power: float) -> np.ndarray:
    return power * UW_PER_W * np.real(np.outer(a, a.conj()))


def build_instance(ch: ChannelRealization, cfg: ScenarioConfig) -> SwiptInstance:
    """Quadratic forms and EH threshold for one realization."""
    r = _power_matrix(ch.g * ch.h, cfg.tx_power)
    j = _power_matrix(ch.f * ch.h, cfg.tx_power)
    c = eh_threshold(cfg.eh_params, cfg.delta, cfg.threshold_mode)
    return SwiptInstance(
        r_matrix=r,
        j_matrix=j,
        c=c,
        noise_power=cfg.noise_power,
        delta=cfg.delta,
        eh_params=cfg.eh_params,
        threshold_mode=cfg.threshold_mode,
        channel_id=ch.channel_id,
        seed=cfg.seed,
        meta={"info_distance": ch.info_distance, "eh_distance": ch.eh_distance},
    )


def generate_instance(cfg: ScenarioConfig, channel_id: int) -> SwiptInstance:
    return build_instance(sample_channels(cfg, channel_id), cfg)


def to_constrained_problem(inst: SwiptInstance) -> ConstrainedProblem:
    """``min -x^T R x  s.t.  c - x^T J x <= 0`` over Ising spins."""
    objective = QuadraticFormComposite(inst.r_matrix, -1.0)
    constraint = QuadraticFormComposite(inst.j_matrix, -1.0, constant=inst.c)
    return ConstrainedProblem(objective, inequalities=[constraint])
