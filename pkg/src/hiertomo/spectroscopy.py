"""Line strengths, absorbance densities, forward projection, noise.

Line strength follows the standard pressure-based-units scaling

    S(T) = S_ref * (Q(T_ref)/Q(T)) * (T_ref/T)
           * exp(-c2 * E'' * (1/T - 1/T_ref))
           * (1 - exp(-c2*nu0/T)) / (1 - exp(-c2*nu0/T_ref))

with c2 = 1.4387769 cm K and T_ref = 296 K. Q(T) is a cubic polynomial
whose coefficients are read from the config file together with each
transition's reference strength and lower-state energy; no spectroscopic
constants are hard-coded here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

C2_CM_K = 1.4387769
T_VALID_K = (250.0, 1500.0)


class SpectroscopyError(ValueError):
    pass


@dataclass(frozen=True)
class TransitionLine:
    """One absorbing transition with its partition-function fit."""

    nu0_cm1: float
    s_ref: float            # cm^-2 atm^-1 at t_ref_k
    e_lower_cm1: float
    t_ref_k: float
    q_poly: tuple[float, float, float, float]  # Q(T) = q0 + q1 T + q2 T^2 + q3 T^3
    name: str = ""

    @classmethod
    def from_config(cls, cfg: dict) -> "TransitionLine":
        return cls(
            nu0_cm1=float(cfg["nu0_cm1"]),
            s_ref=float(cfg["s_ref"]),
            e_lower_cm1=float(cfg["e_lower_cm1"]),
            t_ref_k=float(cfg["t_ref_k"]),
            q_poly=tuple(float(c) for c in cfg["q_poly"]),
            name=str(cfg.get("name", "")),
        )


def partition_function(line: TransitionLine, temperature) -> np.ndarray:
    """Evaluate the cubic partition-function fit Q(T)."""
    t = np.asarray(temperature, dtype=float)
    q0, q1, q2, q3 = line.q_poly
    return q0 + t * (q1 + t * (q2 + t * q3))


def line_strength(line: TransitionLine, temperature) -> np.ndarray:
    """Temperature-dependent line strength in cm^-2 atm^-1.

    Valid for T in [250, 1500] K; S(t_ref_k) == s_ref exactly.
    """
    t = np.asarray(temperature, dtype=float)
    if np.any(t < T_VALID_K[0]) or np.any(t > T_VALID_K[1]):
        raise SpectroscopyError(f"temperature outside validity range {T_VALID_K}")
    tr = line.t_ref_k
    q_ratio = partition_function(line, tr) / partition_function(line, t)
    boltzmann = np.exp(-C2_CM_K * line.e_lower_cm1 * (1.0 / t - 1.0 / tr))
    stimulated = (1.0 - np.exp(-C2_CM_K * line.nu0_cm1 / t)) / \
                 (1.0 - np.exp(-C2_CM_K * line.nu0_cm1 / tr))
    return line.s_ref * q_ratio * (tr / t) * boltzmann * stimulated


def absorbance_density(temperature: np.ndarray, concentration: np.ndarray,
                       pressure_atm: float, line: TransitionLine) -> np.ndarray:
    """Per-cell absorbance density a = P * X * S(T), in cm^-1 atm units
    consistent with chord lengths in cm."""
    t = np.asarray(temperature, dtype=float)
    x = np.asarray(concentration, dtype=float)
    if t.shape != x.shape:
        raise SpectroscopyError("temperature and concentration lengths differ")
    return pressure_atm * x * line_strength(line, t)


def forward_project(sensitivity, density: np.ndarray) -> np.ndarray:
    """Path-integrated absorbances A = L a for the full hierarchical vector."""
    values = sensitivity.values if hasattr(sensitivity, "values") else np.asarray(sensitivity)
    a = np.asarray(density, dtype=float)
    if a.shape[-1] != values.shape[1]:
        raise SpectroscopyError(
            f"density length {a.shape[-1]} != matrix columns {values.shape[1]}")
    return a @ values.T


def noise_sigma(measurements: np.ndarray, snr_db: float) -> float:
    """Gaussian noise standard deviation for a target SNR in dB,
    using the RMS of the measurement vector as the signal level."""
    a = np.asarray(measurements, dtype=float)
    rms = float(np.sqrt(np.mean(a * a)))
    if rms == 0.0:
        raise SpectroscopyError("SNR undefined for an all-zero measurement vector")
    return rms * 10.0 ** (-snr_db / 20.0)


def add_noise(measurements: np.ndarray, snr_db: float,
              rng: np.random.Generator) -> np.ndarray:
    """Return a noisy copy: A + sigma * n with n i.i.d. standard normal."""
    if not np.isfinite(snr_db):
        if snr_db > 0:
            return np.array(measurements, dtype=float, copy=True)
        raise SpectroscopyError("snr_db must be finite or +inf")
    a = np.asarray(measurements, dtype=float)
    sigma = noise_sigma(a, snr_db)
    return a + sigma * rng.standard_normal(a.shape)
