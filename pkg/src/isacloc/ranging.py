"""Periodogram bistatic range estimation from received symbol grids.

The receiver divides its grid entrywise by a transmitter's grid (defined
as zero off the transmit comb), takes an M-point IFFT of every symbol
column, averages the magnitudes over columns, and reads the bistatic
range off the location of the profile peak.  Because only every
comb_size-th subcarrier carries energy, the profile repeats with period
M/comb_size and the peak search is restricted to that unambiguous window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoDetectionError
from .prs_grid import OfdmConfig

__all__ = [
    "RangeProfile",
    "RangeEstimate",
    "extract_and_divide",
    "range_profile",
    "estimate_range",
    "profile_to_csv",
]


@dataclass(frozen=True)
class RangeProfile:
    """Column-averaged IFFT magnitudes over the M delay bins."""

    values: np.ndarray
    bin_width: float  # meters per delay bin


@dataclass(frozen=True)
class RangeEstimate:
    """Peak location of a range profile converted to meters."""

    transmitter_id: int
    receiver_id: int
    peak_index: int
    range: float


def extract_and_divide(received, transmit) -> np.ndarray:
    """Remove the known transmit symbols by point-wise division.

    Entries where the transmit grid is zero are defined as zero, so the
    result carries the per-path channel response on the transmit comb and
    nothing elsewhere.  Accepts grid objects or bare matrices.
    """
    v_rx = np.asarray(getattr(received, "symbols", received))
    v_tx = np.asarray(getattr(transmit, "symbols", transmit))
    if v_rx.shape != v_tx.shape:
        raise ValueError(f"shape mismatch: received {v_rx.shape} vs transmit {v_tx.shape}")
    out = np.zeros(v_rx.shape, dtype=np.complex128)
    np.divide(v_rx, v_tx, out=out, where=(v_tx != 0))
    return out


def range_profile(g: np.ndarray, config: OfdmConfig) -> RangeProfile:
    """Average the per-column IFFT magnitudes of the divided grid.

    The inverse DFT is unnormalized; only relative magnitudes matter for
    the peak search.
    """
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != config.num_subcarriers:
        raise ValueError("g must have one row per subcarrier")
    spectra = np.fft.ifft(g, axis=0) * g.shape[0]
    values = np.abs(spectra).mean(axis=1)
    values.setflags(write=False)
    return RangeProfile(values=values, bin_width=config.range_resolution)


def estimate_range(
    profile: RangeProfile,
    config: OfdmConfig,
    transmitter_id: int = 0,
    receiver_id: int = 0,
) -> RangeEstimate:
    """Locate the profile peak and convert the bin index to meters.

    The argmax is taken over bins [0, M/comb_size); ties resolve to the
    lowest index.  Raises NoDetectionError on an all-zero profile.
    """
    window = config.num_subcarriers // config.comb_size
    values = profile.values[:window]
    if values.size == 0 or float(values.max(initial=0.0)) <= 0.0:
        raise NoDetectionError("range profile has no nonzero peak")
    peak = int(np.argmax(values))
    return RangeEstimate(
        transmitter_id=transmitter_id,
        receiver_id=receiver_id,
        peak_index=peak,
        range=peak * config.range_resolution,
    )


def profile_to_csv(profile: RangeProfile, path) -> None:
    """Dump a profile as `bin,value` rows for debugging."""
    with open(path, "w") as fh:
        fh.write("bin,value\n")
        for i, v in enumerate(profile.values):
            fh.write(f"{i},{float(v)!r}\n")
