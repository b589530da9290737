"""Append-only trial state: one JSON-lines file per trial.

Every mutation is one appended event (create / rows / lock); the in-memory
view is a pure fold over the event log, so restarting the service and
replaying the file reproduces the exact state. Writes are serialized per
trial; reads never block.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .data import TrialDataset
from .estimation import fit_gee
from .links import Link
from .model import ComponentBounds, CostFunction, TargetSpec
from .optimizer import recommend
from .serialize import (SCHEMA_VERSION, fit_to_dict, parse_bounds, parse_cost,
                        parse_z, recommendation_to_dict)

ARMS = ("intervention", "control")


class StoreError(Exception):
    def __init__(self, status: int, message: str, field_path: str = None):
        self.status = status
        self.field_path = field_path
        super().__init__(message)

    @property
    def message(self) -> str:
        return str(self)


@dataclass
class TrialState:
    trial_id: str
    config: dict
    rows: list = field(default_factory=list)        # appended row dicts with stage
    locked: dict = field(default_factory=dict)      # stage -> lock snapshot dict

    @property
    def max_locked(self) -> int:
        return max(self.locked, default=0)

    def bounds(self) -> ComponentBounds:
        return parse_bounds(self.config["bounds"])

    def link(self) -> Link:
        return Link.parse(self.config["link"])

    def cost(self) -> CostFunction:
        return parse_cost(self.config["cost"])

    def theta(self) -> float:
        return float(self.config["theta"])

    def include_intercept(self) -> bool:
        return bool(self.config.get("include_intercept", True))

    def n_components(self) -> int:
        return len(self.config["bounds"]["lower"])

    def n_covariates(self) -> int:
        return int(self.config.get("n_covariates", 0))

    def dataset(self, through_stage: int = None) -> TrialDataset:
        rows = self.rows
        if through_stage is not None:
            rows = [r for r in rows if r["stage"] <= through_stage]
        if not rows:
            raise StoreError(400, "trial has no outcome rows yet")
        return TrialDataset(
            stage=np.array([r["stage"] for r in rows], dtype=int),
            center_id=tuple(r["center_id"] for r in rows),
            arm=np.array([r["arm"] == "intervention" for r in rows], dtype=bool),
            a=np.array([r["a"] for r in rows], dtype=float),
            z=np.array([r["z"] for r in rows], dtype=float).reshape(len(rows), -1),
            y=np.array([r["y"] for r in rows], dtype=float),
        )


def _validate_config(doc: dict) -> dict:
    for key in ("bounds", "link", "cost", "theta"):
        if key not in doc:
            raise StoreError(400, f"missing required field {key}", field_path=key)
    bounds = doc["bounds"]
    if not isinstance(bounds, dict) or "lower" not in bounds or "upper" not in bounds:
        raise StoreError(400, "bounds needs lower and upper arrays", field_path="bounds")
    try:
        parse_bounds(bounds)
    except Exception as exc:
        raise StoreError(400, f"bounds: {exc}", field_path="bounds") from None
    try:
        parse_cost(doc["cost"])
    except Exception as exc:
        raise StoreError(400, f"cost: {exc}", field_path="cost") from None
    try:
        Link.parse(doc["link"])
    except Exception as exc:
        raise StoreError(400, str(exc), field_path="link") from None
    theta = doc["theta"]
    if not isinstance(theta, (int, float)):
        raise StoreError(400, "theta must be a number", field_path="theta")
    return doc


def _validate_row(state: TrialState, i: int, row: dict) -> dict:
    def bad(field_name, msg):
        raise StoreError(400, msg, field_path=f"rows[{i}].{field_name}")

    if not isinstance(row, dict):
        raise StoreError(400, "row must be an object", field_path=f"rows[{i}]")
    cid = row.get("center_id")
    if not cid or not isinstance(cid, str):
        bad("center_id", "center_id must be a nonempty string")
    arm = row.get("arm")
    if arm not in ARMS:
        bad("arm", f"arm must be one of {ARMS}, got {arm!r}")
    try:
        y = float(row["y"])
    except (KeyError, TypeError, ValueError):
        bad("y", "y must be a number")
    a = row.get("a")
    if not isinstance(a, (list, tuple)) or len(a) != state.n_components():
        bad("a", f"a must have {state.n_components()} components")
    try:
        a = [float(v) for v in a]
    except (TypeError, ValueError):
        bad("a", "a entries must be numbers")
    if arm == "control" and any(v != 0.0 for v in a):
        bad("a", "control rows must carry an all-zero package")
    z = row.get("z", [])
    if not isinstance(z, (list, tuple)):
        bad("z", "z must be an array")
    try:
        z = [float(v) for v in z]
    except (TypeError, ValueError):
        bad("z", "z entries must be numbers")
    if state.rows:
        want = len(state.rows[0]["z"])
        if len(z) != want:
            bad("z", f"z must have {want} entries to match earlier rows")
    return {"center_id": cid, "arm": arm, "y": y, "a": a, "z": z}


class TrialStore:
    """Directory of per-trial event logs plus their folded in-memory states."""

    def __init__(self, root: str):
        self.root = str(root)
        os.makedirs(self.root, exist_ok=True)
        self._states: dict[str, TrialState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry = threading.Lock()
        for name in sorted(os.listdir(self.root)):
            if name.endswith(".jsonl"):
                self._load(os.path.join(self.root, name))

    # -- event plumbing ----------------------------------------------------
    def _path(self, trial_id: str) -> str:
        return os.path.join(self.root, f"{trial_id}.jsonl")

    def _lock_for(self, trial_id: str) -> threading.Lock:
        with self._registry:
            return self._locks.setdefault(trial_id, threading.Lock())

    def _load(self, path: str) -> None:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    self._fold(json.loads(line))

    def _append(self, trial_id: str, event: dict) -> None:
        event["ts"] = event.get("ts", time.time())
        with open(self._path(trial_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
        self._fold(event)

    def _fold(self, event: dict) -> None:
        kind = event["event"]
        tid = event["trial_id"]
        if kind == "create":
            self._states[tid] = TrialState(trial_id=tid, config=event["config"])
        elif kind == "rows":
            self._states[tid].rows.extend(
                dict(r, stage=event["stage"]) for r in event["rows"])
        elif kind == "lock":
            self._states[tid].locked[event["stage"]] = event["snapshot"]

    # -- queries -----------------------------------------------------------
    def get(self, trial_id: str) -> TrialState:
        state = self._states.get(trial_id)
        if state is None:
            raise StoreError(404, f"unknown trial {trial_id!r}")
        return state

    def trial_ids(self) -> list:
        return sorted(self._states)

    # -- mutations ---------------------------------------------------------
    def create(self, trial_id: str, config: dict) -> TrialState:
        config = _validate_config(config)
        with self._registry:
            if trial_id in self._states:
                raise StoreError(409, f"trial {trial_id!r} already exists")
        self._append(trial_id, {"event": "create", "trial_id": trial_id,
                                "schema_version": SCHEMA_VERSION, "config": config})
        return self._states[trial_id]

    def append_rows(self, trial_id: str, stage: int, rows: list) -> int:
        state = self.get(trial_id)
        with self._lock_for(trial_id):
            if stage < 1:
                raise StoreError(400, "stage must be >= 1", field_path="stage")
            if stage in state.locked:
                raise StoreError(409, f"stage {stage} is locked; its rows are immutable")
            if stage > state.max_locked + 1:
                raise StoreError(409, f"stage {stage} is not open yet; "
                                      f"lock stage {state.max_locked + 1} first")
            if not rows:
                raise StoreError(400, "rows must be a nonempty array", field_path="rows")
            clean = [_validate_row(state, i, r) for i, r in enumerate(rows)]
            # center-level consistency against rows already in this stage
            seen = {}
            for r in state.rows:
                if r["stage"] == stage:
                    seen[r["center_id"]] = (tuple(r["a"]), tuple(r["z"]), r["arm"])
            for i, r in enumerate(clean):
                sig = (tuple(r["a"]), tuple(r["z"]), r["arm"])
                if seen.setdefault(r["center_id"], sig) != sig:
                    raise StoreError(400,
                                     f"center {r['center_id']!r} already has a different "
                                     f"package/covariates/arm in stage {stage}",
                                     field_path=f"rows[{i}]")
            self._append(trial_id, {"event": "rows", "trial_id": trial_id,
                                    "stage": stage, "rows": clean})
        return len(clean)

    def lock_stage(self, trial_id: str, stage: int) -> dict:
        state = self.get(trial_id)
        with self._lock_for(trial_id):
            if stage in state.locked:
                raise StoreError(409, f"stage {stage} is already locked")
            if stage != state.max_locked + 1:
                raise StoreError(409, f"stages lock in order; expected stage "
                                      f"{state.max_locked + 1}, got {stage}")
            if not any(r["stage"] == stage for r in state.rows):
                raise StoreError(409, f"stage {stage} has no rows to lock")
            ds = state.dataset(through_stage=stage)
            fit = fit_gee(ds, state.link(), include_intercept=state.include_intercept())
            q = ds.n_covariates
            zref = parse_z(state.config.get("z_ref", [0.0] * q))
            rec = recommend(fit.beta_hat, zref, state.bounds(), state.cost(),
                            TargetSpec(state.theta()), state.link())
            snapshot = {
                "stage": stage,
                "n_rows": int(ds.n_total),
                "fit": fit_to_dict(fit),
                "next_stage_recommendation": recommendation_to_dict(rec),
            }
            self._append(trial_id, {"event": "lock", "trial_id": trial_id,
                                    "stage": stage, "snapshot": snapshot})
        return snapshot

    def full_state(self, trial_id: str) -> dict:
        state = self.get(trial_id)
        return {
            "schema_version": SCHEMA_VERSION,
            "trial_id": state.trial_id,
            "config": state.config,
            "n_rows": len(state.rows),
            "stages": sorted({int(r["stage"]) for r in state.rows}),
            "locked_stages": sorted(state.locked),
            "locks": {str(k): v for k, v in sorted(state.locked.items())},
            "rows": state.rows,
        }
