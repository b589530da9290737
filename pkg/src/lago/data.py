"""Trial datasets: stage/center/arm-structured outcome rows, plus CSV ingestion.

CSV schema (header required, UTF-8, '.' decimal, no missing values):

    stage,center_id,arm,y,a_1..a_P,z_1..z_Q

arm is ``intervention`` or ``control``; control rows must carry an all-zero
package. Every (stage, center) group must share a single package and
covariate vector, and stages must form a contiguous range 1..K.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

ARMS = ("intervention", "control")


class DatasetError(ValueError):
    """Malformed trial data; message carries the offending row/column."""


@dataclass(frozen=True)
class TrialDataset:
    stage: np.ndarray      # (n,) int, 1..K
    center_id: tuple       # (n,) str
    arm: np.ndarray        # (n,) bool, True = intervention
    a: np.ndarray          # (n, P) actual packages
    z: np.ndarray          # (n, Q) center covariates
    y: np.ndarray          # (n,) outcomes

    def __post_init__(self):
        n = len(self.y)
        for name in ("stage", "arm", "a", "z"):
            if len(getattr(self, name)) != n:
                raise DatasetError(f"column {name} has {len(getattr(self, name))} rows, expected {n}")
        if n == 0:
            raise DatasetError("dataset is empty")
        _validate(self)

    @property
    def n_total(self) -> int:
        return len(self.y)

    @property
    def n_stages(self) -> int:
        return int(self.stage.max())

    @property
    def n_components(self) -> int:
        return self.a.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.z.shape[1]

    def stage_sizes(self) -> list[int]:
        return [int(np.sum(self.stage == k)) for k in range(1, self.n_stages + 1)]

    def subset(self, mask) -> "TrialDataset":
        mask = np.asarray(mask, dtype=bool)
        return TrialDataset(
            stage=self.stage[mask],
            center_id=tuple(c for c, m in zip(self.center_id, mask) if m),
            arm=self.arm[mask],
            a=self.a[mask],
            z=self.z[mask],
            y=self.y[mask],
        )

    def through_stage(self, k: int) -> "TrialDataset":
        """Rows from stages 1..k (relabeling is never needed: stages stay contiguous)."""
        return self.subset(self.stage <= k)


def _validate(ds: TrialDataset) -> None:
    if ds.stage.dtype.kind not in "iu":
        raise DatasetError("stage must be integer")
    stages = np.unique(ds.stage)
    if stages[0] != 1 or not np.array_equal(stages, np.arange(1, len(stages) + 1)):
        raise DatasetError(f"stages must form a contiguous range 1..K, got {stages.tolist()}")
    if not (np.all(np.isfinite(ds.a)) and np.all(np.isfinite(ds.z)) and np.all(np.isfinite(ds.y))):
        raise DatasetError("non-finite value in a/z/y")
    ctrl = ~ds.arm
    if np.any(ds.a[ctrl] != 0.0):
        bad = int(np.nonzero(np.any(ds.a[ctrl] != 0.0, axis=1))[0][0])
        idx = np.nonzero(ctrl)[0][bad]
        raise DatasetError(f"control-arm center {ds.center_id[idx]!r} (stage {ds.stage[idx]}) "
                           "carries a nonzero package")
    # one package / covariate vector per (stage, center)
    seen: dict[tuple, tuple] = {}
    for i in range(ds.n_total):
        key = (int(ds.stage[i]), ds.center_id[i])
        sig = (ds.a[i].tobytes(), ds.z[i].tobytes(), bool(ds.arm[i]))
        if key in seen:
            if seen[key] != sig:
                raise DatasetError(f"center {key[1]!r} has inconsistent package/covariates/arm "
                                   f"within stage {key[0]}")
        else:
            seen[key] = sig


def from_center_blocks(blocks) -> TrialDataset:
    """Build a dataset from (stage, center_id, arm, a, z, y_array) blocks."""
    stage, cid, arm, a, z, y = [], [], [], [], [], []
    for (k, c, is_int, pkg, cov, ys) in blocks:
        ys = np.asarray(ys, dtype=float).reshape(-1)
        m = len(ys)
        stage.append(np.full(m, k, dtype=int))
        cid.extend([str(c)] * m)
        arm.append(np.full(m, bool(is_int)))
        a.append(np.tile(np.asarray(pkg, dtype=float), (m, 1)))
        cov = np.asarray(cov, dtype=float).reshape(-1)
        z.append(np.tile(cov, (m, 1)) if len(cov) else np.zeros((m, 0)))
        y.append(ys)
    return TrialDataset(
        stage=np.concatenate(stage),
        center_id=tuple(cid),
        arm=np.concatenate(arm),
        a=np.vstack(a),
        z=np.vstack(z),
        y=np.concatenate(y),
    )


def load_trial_csv(path) -> TrialDataset:
    """Parse the trial CSV schema; raise DatasetError naming the first violation."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return _parse_csv(fh, str(path))


def loads_trial_csv(text: str) -> TrialDataset:
    return _parse_csv(io.StringIO(text), "<string>")


def _parse_csv(fh, name: str) -> TrialDataset:
    header = fh.readline()
    if not header:
        raise DatasetError(f"{name}: empty file")
    cols = [c.strip() for c in header.rstrip("\n\r").split(",")]
    fixed = ["stage", "center_id", "arm", "y"]
    if cols[:4] != fixed:
        raise DatasetError(f"{name}: header must start with {','.join(fixed)}, got {cols[:4]}")
    a_cols = [c for c in cols[4:] if c.startswith("a_")]
    z_cols = [c for c in cols[4:] if c.startswith("z_")]
    if cols[4:] != a_cols + z_cols:
        raise DatasetError(f"{name}: columns after y must be a_1..a_P then z_1..z_Q, got {cols[4:]}")
    expect_a = [f"a_{i}" for i in range(1, len(a_cols) + 1)]
    expect_z = [f"z_{i}" for i in range(1, len(z_cols) + 1)]
    if a_cols != expect_a or z_cols != expect_z:
        raise DatasetError(f"{name}: package/covariate columns must be numbered consecutively "
                           f"from 1, got {a_cols + z_cols}")
    P, Q = len(a_cols), len(z_cols)

    stage, cid, arm, a, z, y = [], [], [], [], [], []
    for lineno, line in enumerate(fh, start=2):
        line = line.rstrip("\n\r")
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4 + P + Q:
            raise DatasetError(f"{name}:{lineno}: expected {4 + P + Q} fields, got {len(parts)}")
        try:
            stage.append(int(parts[0]))
        except ValueError:
            raise DatasetError(f"{name}:{lineno}: column stage: malformed integer {parts[0]!r}") from None
        cid.append(parts[1])
        if parts[2] not in ARMS:
            raise DatasetError(f"{name}:{lineno}: column arm: expected intervention|control, "
                               f"got {parts[2]!r}")
        arm.append(parts[2] == "intervention")
        row_nums = []
        for col, raw in zip(cols[3:], parts[3:]):
            try:
                row_nums.append(float(raw))
            except ValueError:
                raise DatasetError(f"{name}:{lineno}: column {col}: malformed number {raw!r}") from None
        y.append(row_nums[0])
        a.append(row_nums[1:1 + P])
        z.append(row_nums[1 + P:])
    if not y:
        raise DatasetError(f"{name}: no data rows")
    return TrialDataset(
        stage=np.asarray(stage, dtype=int),
        center_id=tuple(cid),
        arm=np.asarray(arm, dtype=bool),
        a=np.asarray(a, dtype=float).reshape(len(y), P),
        z=np.asarray(z, dtype=float).reshape(len(y), Q),
        y=np.asarray(y, dtype=float),
    )


def write_trial_csv(ds: TrialDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(ds))


def csv_text(ds: TrialDataset) -> str:
    cols = ["stage", "center_id", "arm", "y"]
    cols += [f"a_{i + 1}" for i in range(ds.n_components)]
    cols += [f"z_{i + 1}" for i in range(ds.n_covariates)]
    out = [",".join(cols)]
    for i in range(ds.n_total):
        row = [str(int(ds.stage[i])), ds.center_id[i],
               "intervention" if ds.arm[i] else "control", repr(float(ds.y[i]))]
        row += [repr(float(v)) for v in ds.a[i]]
        row += [repr(float(v)) for v in ds.z[i]]
        out.append(",".join(row))
    return "\n".join(out) + "\n"
