"""Single-level db2 detail coefficients of the post-fault relay currents.

At 4 kHz sampling the detail half of one analysis level carries the 1-2 kHz
band. One power cycle (80 samples) after inception is transformed per phase
with periodic extension, giving 40 coefficients per phase and 120 in total.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

WINDOW = 80
N_FEATURES = 3 * WINDOW // 2


def db2_filters():
    """Analysis low-pass h and high-pass g of the Daubechies-2 wavelet."""
    s3 = np.sqrt(3.0)
    h = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * np.sqrt(2.0))
    g = np.array([(-1) ** k * h[3 - k] for k in range(4)])
    return h, g


def dwt_level1(x):
    """Periodic one-level DWT: returns (approx, detail), each len(x) // 2 long."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n < 4 or n % 2:
        raise DataError(f"signal length must be even and >= 4, got {n}")
    h, g = db2_filters()
    # y[k] = sum_m f[m] x[(2k + m) mod n]
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(4)[None, :]) % n
    seg = x[..., idx]
    return seg @ h, seg @ g


def idwt_level1(approx, detail):
    """Inverse of dwt_level1 (transpose of the orthonormal analysis operator)."""
    approx = np.asarray(approx, dtype=float)
    detail = np.asarray(detail, dtype=float)
    half = approx.shape[-1]
    n = 2 * half
    h, g = db2_filters()
    x = np.zeros(approx.shape[:-1] + (n,))
    for m in range(4):
        # positions are distinct for fixed m
        pos = (2 * np.arange(half) + m) % n
        x[..., pos] += approx * h[m] + detail * g[m]
    return x


def analysis_matrix(n=WINDOW):
    """Dense n x n matrix stacking the approx rows over the detail rows."""
    eye = np.eye(n)
    a, d = dwt_level1(eye)
    return np.vstack([a.T, d.T])


@dataclass
class FeatureVector:
    values: np.ndarray
    zone: int
    case_id: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (N_FEATURES,):
            raise DataError(f"feature vector must have {N_FEATURES} entries")
        if not np.all(np.isfinite(self.values)):
            raise DataError(f"non-finite features in case {self.case_id}")


def extract_features(rec, zone, i_base=1.0) -> FeatureVector:
    """Detail coefficients of one post-fault cycle of each phase, scaled by i_base."""
    start = rec.inception_index
    stop = start + WINDOW
    if start < 0 or stop > len(rec.ia):
        raise DataError(f"record {rec.case_id}: window [{start}, {stop}) overruns {len(rec.ia)} samples")
    window = np.vstack([rec.ia[start:stop], rec.ib[start:stop], rec.ic[start:stop]]) / i_base
    _, detail = dwt_level1(window)
    return FeatureVector(detail.reshape(-1), zone, rec.case_id)


def feature_columns():
    return [f"f{k:03d}" for k in range(1, N_FEATURES + 1)]


def write_features(features, path) -> None:
    rows = sorted(features, key=lambda f: f.case_id)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "zone"] + feature_columns())
        for f in rows:
            w.writerow([f.case_id, f.zone] + [repr(float(v)) for v in f.values])


def read_features(path):
    """Returns (case_ids, zones, X) arrays in file order."""
    path = Path(path)
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise DataError(f"{path}: empty feature file") from None
        if [h.strip() for h in header] != ["case_id", "zone"] + feature_columns():
            raise DataError(f"{path}: unexpected header")
        ids, zones, rows = [], [], []
        for line in r:
            if len(line) != N_FEATURES + 2:
                raise DataError(f"{path}: row with {len(line)} fields")
            ids.append(int(line[0]))
            zones.append(int(line[1]))
            rows.append([float(v) for v in line[2:]])
    return np.array(ids, dtype=int), np.array(zones, dtype=int), np.array(rows).reshape(-1, N_FEATURES)
